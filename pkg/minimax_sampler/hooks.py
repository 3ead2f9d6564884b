# SPDX-License-Identifier: Apache-2.0
# Copyright Contributors to the minimax-sampler project

import importlib
import logging
import os

from .errors import ValidationError


logger = logging.getLogger(__name__)

# Custom hook names
HOOK_POST_REPORT = "minimax_sampler_post_report"

# Comma separated "module:function" hooks to install at import
ENV_HOOKS = "MINIMAX_SAMPLER_HOOKS"

_registry = {}


def names():
    """Returns:
        list[str]: Hook names with at least one installed callable.
    """
    return sorted(name for name, funcs in _registry.items() if funcs)


def register(name, func):
    """Install a callable for a named hook point.

    Callables installed for the same name run in registration order.

    Args:
        name (str): Hook name, e.g. ``HOOK_POST_REPORT``
        func (callable): Hook implementation
    """
    _registry.setdefault(name, []).append(func)
    logger.debug("Registered %s hook %r", name, func)


def clear(name=None):
    """Remove installed callables for one hook name, or all of them."""
    if name is None:
        _registry.clear()
    else:
        _registry.pop(name, None)


def load_from_env(name=HOOK_POST_REPORT):
    """Install the hooks listed in ``MINIMAX_SAMPLER_HOOKS``.

    Returns:
        int: Number of hooks installed

    Raises:
        ValidationError: If an entry cannot be resolved
    """
    listed = os.getenv(ENV_HOOKS, "")
    count = 0
    for entry in (part.strip() for part in listed.split(",")):
        if not entry:
            continue
        module_name, _, func_name = entry.partition(":")
        if not module_name or not func_name:
            raise ValidationError(
                "{0} entry {1!r} must look like module:function".format(
                    ENV_HOOKS, entry
                )
            )
        try:
            func = getattr(importlib.import_module(module_name), func_name)
        except (ImportError, AttributeError) as exc:
            raise ValidationError(
                "cannot load hook {0!r}: {1}".format(entry, exc)
            )
        register(name, func)
        count += 1
    return count


def run_post_report_hook(report):
    """This hook is called to amend a report's results before it is
    written. Each installed callable receives the report and returns the
    new or updated report.

    Args:
        report (dict): Report about to be written

    Returns:
        dict: New or updated report
    """
    for func in _registry.get(HOOK_POST_REPORT, []):
        updated = func(report)
        if updated is not None:
            report = updated
    return report
