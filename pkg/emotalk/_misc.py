"""
General purpose utility functions.
Diagnostics logged when training aborts.
"""

import logging
import traceback
import warnings

import torch

__all__ = [
    "log_traceback",
    "describe_tensor",
]

logger = logging.getLogger('emotalk')


def describe_tensor(t):
    """
    One-line summary of a tensor: shape, non-finite count and finite range.
    """

    t = t.detach()
    finite = torch.isfinite(t)
    n_bad = int((~finite).sum())
    if n_bad == t.numel():
        return 'shape={0} non-finite={1}/{1}'.format(tuple(t.shape), n_bad)
    vals = t[finite].double()
    return 'shape={0} non-finite={1}/{2} min={3:.4g} max={4:.4g}'.format(
        tuple(t.shape), n_bad, t.numel(), vals.min().item(), vals.max().item())


def log_traceback(msg: str, **context) -> None:
    """
    Logs msg with its context (e.g. epoch, step, loss components) and the current traceback, then warns.
    """

    exc = traceback.format_exc()
    if not exc.startswith('NoneType: None'):
        logger.warning(exc)
    if context:
        msg = '{0} ({1})'.format(msg, ', '.join('{0}={1}'.format(k, context[k]) for k in sorted(context)))
    logger.warning(msg)
    warnings.warn(msg)
