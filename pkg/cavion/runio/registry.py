"""
Task Registry
Decorator-based registration of the run tasks (simulations, fits, reports).
"""

from typing import Any, Callable, Dict, List

# Global registry of all tasks
_TASK_REGISTRY: Dict[str, Dict[str, Any]] = {}


def task(name: str, description: str, scenario: str = None, preset: str = "paper",
         params: Dict[str, Any] = None, needs_input: bool = False):
    """
    Decorator to register a function as a run task.

    Args:
        name: dotted task name used in configs, e.g. "sim.g2"
        description: one-line summary shown by the CLI
        scenario: default scenario kind ("single_ion", "g2", "decay", "particle");
            None for tasks that only read files
        preset: default detector preset
        params: accepted task parameters and their defaults
        needs_input: the task reads the file given by the `input` parameter

    Example:
        @task("sim.decay", "Purcell decay histogram", scenario="decay", params={"trials": 400000})
        def sim_decay(run: RunContext) -> dict:
            ...
    """
    def decorator(func: Callable) -> Callable:
        defaults = dict(params or {})
        if needs_input:
            defaults.setdefault("input", None)
        _TASK_REGISTRY[name] = {
            "function": func,
            "description": description,
            "scenario": scenario,
            "preset": preset,
            "params": defaults,
            "needs_input": needs_input,
        }
        return func
    return decorator


def get_task(name: str) -> Dict[str, Any]:
    return _TASK_REGISTRY[name]


def get_all_tasks() -> Dict[str, Dict[str, Any]]:
    """Returns the complete task registry."""
    return _TASK_REGISTRY


def task_names() -> List[str]:
    return sorted(_TASK_REGISTRY)
