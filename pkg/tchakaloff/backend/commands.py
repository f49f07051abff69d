from enum import Enum
from importlib import import_module


def _load_implementation(module_name, class_name):
    """Import an op class from backend.implementations on first use."""
    mod = import_module(f"tchakaloff.backend.implementations.{module_name}")
    return getattr(mod, class_name)


class Command(Enum):
    COMPRESS = "compress"
    MOMENTS = "moments"
    REPRESENT_GRID = "represent-grid"
    MM = "mm"
    ROOTS = "roots"
    SELFTEST = "selftest"


_COMMAND_IMPLEMENTATIONS = {
    Command.COMPRESS: ("compressop", "CompressOp"),
    Command.MOMENTS: ("momentsop", "MomentsOp"),
    Command.REPRESENT_GRID: ("gridop", "GridOp"),
    Command.MM: ("mmop", "MomentMatrixOp"),
    Command.ROOTS: ("rootsop", "RootsOp"),
    Command.SELFTEST: ("selftestop", "SelfTestOp"),
}


def load_op(command):
    """Return the BaseOp subclass implementing `command` (a Command or its string value)."""
    if isinstance(command, str):
        command = Command(command)
    if command not in _COMMAND_IMPLEMENTATIONS:
        raise ValueError(f"Unknown command: {command!r}")
    module_name, class_name = _COMMAND_IMPLEMENTATIONS[command]
    return _load_implementation(module_name, class_name)
