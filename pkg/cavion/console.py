"""
cavion Console
Emoji-prefixed status lines, coloured when colorama is installed.
"""

import sys

from . import config

try:
    from colorama import Fore, Style, just_fix_windows_console
    just_fix_windows_console()
    COLORAMA_AVAILABLE = True
except ImportError:
    COLORAMA_AVAILABLE = False

_LEVELS = {
    "info": ("🔬", "CYAN"),
    "step": ("⚡", "BLUE"),
    "success": ("✅", "GREEN"),
    "warn": ("⚠️", "YELLOW"),
    "error": ("❌", "RED"),
}


def _emit(level: str, message: str, force: bool = False):
    if config.QUIET and not force:
        return
    emoji, colour = _LEVELS[level]
    line = f"{emoji} {message}"
    if COLORAMA_AVAILABLE:
        line = f"{getattr(Fore, colour)}{line}{Style.RESET_ALL}"
    stream = sys.stderr if level in ("warn", "error") else sys.stdout
    print(line, file=stream)


def info(message: str):
    _emit("info", message)


def step(message: str):
    _emit("step", message)


def success(message: str):
    _emit("success", message)


def warn(message: str):
    _emit("warn", message)


def error(message: str):
    # errors are always shown
    _emit("error", message, force=True)
