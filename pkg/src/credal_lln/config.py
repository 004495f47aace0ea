"""Enumeration caps and numeric tolerances."""
import os

PROB_TOL = 1e-12
IDENTITY_TOL = 1e-10

#: Irrelevance checkers refuse to enumerate more events than this.
DEFAULT_EVENT_CAP = 2**20
#: Trajectory-tree enumeration refuses to hold more leaves than this.
DEFAULT_NODE_CAP = 2_000_000

CAP_ENV_VAR = "CREDAL_LLN_CAP"


def _env_cap():
    raw = os.environ.get(CAP_ENV_VAR)
    if not raw:
        return None
    try:
        value = int(float(raw))
    except ValueError:
        return None
    return value if value > 0 else None


def event_cap(cap=None):
    if cap is not None:
        return int(cap)
    return _env_cap() or DEFAULT_EVENT_CAP


def node_cap(cap=None):
    if cap is not None:
        return int(cap)
    return _env_cap() or DEFAULT_NODE_CAP
