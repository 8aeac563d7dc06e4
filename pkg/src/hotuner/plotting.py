"""Static vector-graphics plots of run traces."""

from __future__ import annotations

import numpy as np

from .errors import InvalidParameterError, PreconditionError

QUANTITIES = ("loss-gap", "V", "grad_norm")


def emit_plot(traces, quantity: str, path):
    """Render one log-scale series per trace into a self-contained SVG.

    Series are truncated at their divergence row by construction; nonpositive
    values are masked out of the log axis.
    """
    if not traces:
        raise PreconditionError("emit_plot needs at least one trace")
    if quantity not in QUANTITIES:
        raise InvalidParameterError(f"unknown quantity {quantity!r}; known: {QUANTITIES}")

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for trace in traces:
        if quantity == "loss-gap":
            values = trace.gap
            label_q = "loss gap"
        elif quantity == "V":
            values = trace.lyapunov
            label_q = "Lyapunov value"
        else:
            values = trace.grad_norm
            label_q = "gradient norm"
        y = np.asarray(values, dtype=np.float64).copy()
        y[~(y > 0)] = np.nan
        ax.plot(trace.k, y, label=trace.metadata.get("name", "run"), linewidth=1.2)
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel(label_q)
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, which="both", alpha=0.25)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path
