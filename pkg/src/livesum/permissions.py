"""Permission decisions: role × page mode × public flags → allow/deny.

Action groups: "comment" covers adding comments and editing your own;
"edit" covers summarize, edit/delete summaries, move, hide, tag (the
synthesis/organization verbs); "flag" needs comment-or-edit rights; "read"
gates views and streams; "admin" is the creator managing members/permissions.

The creator is exempt from the page mode (someone must be able to summarize
when a comment-only ideation phase ends). For everyone else, comment-only
denies the edit verbs and flagging; edit-only denies commenting.
"""

from __future__ import annotations

from .model import (
    MODE_COMMENT_ONLY,
    MODE_EDIT_ONLY,
    ROLE_COMMENTER,
    ROLE_CREATOR,
    ROLE_EDITOR,
    Page,
    UserId,
)

READ = "read"
COMMENT = "comment"
EDIT = "edit"
FLAG = "flag"
ADMIN = "admin"

ACTIONS = (READ, COMMENT, EDIT, FLAG, ADMIN)

_ROLE_RIGHTS = {
    ROLE_CREATOR: {READ, COMMENT, EDIT, FLAG, ADMIN},
    ROLE_EDITOR: {READ, COMMENT, EDIT, FLAG},
    ROLE_COMMENTER: {READ, COMMENT, FLAG},
}


def check_permission(page: Page, actor: UserId, action: str) -> bool:
    role = page.members.get(actor)
    if role == ROLE_CREATOR:
        return True
    if action == ADMIN:
        return False

    if role in _ROLE_RIGHTS:
        rights = set(_ROLE_RIGHTS[role])
    else:
        rights = set()
        if page.publicly_commentable:
            rights |= {READ, COMMENT, FLAG}
        if page.publicly_editable:
            rights |= {READ, COMMENT, EDIT, FLAG}
    if action not in rights:
        return False

    if page.mode == MODE_COMMENT_ONLY and action in (EDIT, FLAG):
        return False
    if page.mode == MODE_EDIT_ONLY and action == COMMENT:
        return False
    return True
