"""
The subcommands of the command line tool.
"""

from .ablate import cmd_ablate
from .curate import cmd_curate
from .evaluate import cmd_eval
from .nearest import cmd_inspect
from .synthetic import cmd_synthetic
from .train import cmd_train

__all__ = [
    "cmd_ablate",
    "cmd_curate",
    "cmd_eval",
    "cmd_inspect",
    "cmd_synthetic",
    "cmd_train",
]
