class CmdpInputError(ValueError):
    """Malformed model, policy or parameter supplied by the caller."""


class PlannerError(RuntimeError):
    """A numerical routine failed to meet its own accuracy contract."""
