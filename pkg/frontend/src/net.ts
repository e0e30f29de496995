/** Browser transport: fetch for requests, streamed fetch for frames. */

import type { StreamHandle, Wire, WireResponse } from "./session.js";
import type { StreamMessage } from "./types.js";

export function httpWire(baseUrl: string, token: string | null): Wire {
  const headers: Record<string, string> = { "content-type": "application/json" };
  if (token) headers["authorization"] = `Bearer ${token}`;

  return {
    async request(method: string, path: string, body?: unknown): Promise<WireResponse> {
      const res = await fetch(baseUrl + path, {
        method,
        headers,
        body: body === undefined ? undefined : JSON.stringify(body),
      });
      let json: any = null;
      try {
        json = await res.json();
      } catch {
        json = null;
      }
      return { status: res.status, json };
    },

    openStream(path, onMessage, onClose): StreamHandle {
      const controller = new AbortController();
      (async () => {
        try {
          const res = await fetch(baseUrl + path, { headers, signal: controller.signal });
          if (!res.ok || !res.body) {
            onClose(new Error(`stream failed: ${res.status}`));
            return;
          }
          const reader = res.body.getReader();
          const decoder = new TextDecoder();
          let buffer = "";
          for (;;) {
            const { done, value } = await reader.read();
            if (done) break;
            buffer += decoder.decode(value, { stream: true });
            let nl;
            while ((nl = buffer.indexOf("\n")) >= 0) {
              const line = buffer.slice(0, nl).trim();
              buffer = buffer.slice(nl + 1);
              if (line) onMessage(JSON.parse(line) as StreamMessage);
            }
          }
          onClose();
        } catch (exc) {
          if (!controller.signal.aborted) onClose(exc);
        }
      })();
      return { close: () => controller.abort() };
    },
  };
}
