"""Figure rendering for the report paths. PNG files land next to the CSVs."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

MARKERS = ["o", "s", "^", "v", "d", "x", "+", "*"]


def _new_axes(xlabel, ylabel):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.4)
    return fig, ax


def ee_vs_sweep(rows, path, xlabel="sweep"):
    """Energy efficiency against the sweep parameter, one curve per scheme."""
    fig, ax = _new_axes(xlabel, "Energy efficiency (bits/J)")
    schemes = sorted({r.scheme for r in rows})
    for i, scheme in enumerate(schemes):
        pts = sorted((r.sweep_value, r.ee_bits_per_joule)
                     for r in rows if r.scheme == scheme)
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                marker=MARKERS[i % len(MARKERS)], label=scheme)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def de_validation_figure(rows, path, xlabel="sweep"):
    """Deterministic vs Monte-Carlo efficiency, with the relative error below."""
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(6.4, 6.0), sharex=True)
    x = [r["sweep_value"] for r in rows]
    top.plot(x, [r["de_ee_bits_per_joule"] for r in rows], marker="o",
             label="deterministic")
    top.plot(x, [r["mc_ee_bits_per_joule"] for r in rows], marker="s",
             linestyle="--", label="Monte-Carlo")
    top.set_ylabel("Energy efficiency (bits/J)")
    top.grid(True, alpha=0.4)
    top.legend()
    bottom.plot(x, [100.0 * r["rel_error"] for r in rows], marker="^", color="tab:red")
    bottom.set_xlabel(xlabel)
    bottom.set_ylabel("relative error (%)")
    bottom.grid(True, alpha=0.4)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def orders_figure(rows, path, xlabel="sweep"):
    """Efficiency per decoding-order selection method."""
    fig, ax = _new_axes(xlabel, "Energy efficiency (bits/J)")
    x = [r["sweep_value"] for r in rows]
    for i, method in enumerate(["exhaustive", "greedy", "random", "reverse"]):
        ax.plot(x, [r[method] for r in rows], marker=MARKERS[i % len(MARKERS)],
                label=method)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
