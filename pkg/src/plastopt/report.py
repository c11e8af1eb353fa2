"""Figure rendering for study reports.

Figures are written next to the delimited data files they illustrate.
Rendering is headless (Agg) and deterministic: PNG metadata that embeds
library versions or timestamps is stripped so identical runs produce
identical bytes.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_PNG_META = {"Software": None, "Creation Time": None}


def _save(fig, path):
    fig.savefig(path, dpi=110, metadata=_PNG_META)
    plt.close(fig)
    return path


def render_rate_study(path, lams, gaps, bounds, order):
    """Log-log plot of measured gap and analytic bound versus sqrt(lam)."""
    lams = np.asarray(lams, dtype=float)
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.loglog(np.sqrt(lams), gaps, "o-", label="measured gap")
    ax.loglog(np.sqrt(lams), bounds, "s--", label="bound")
    ax.set_xlabel(r"$\sqrt{\lambda}$")
    ax.set_ylabel(r"$C(L^2)$ gap")
    ax.set_title(f"regularization gap, fitted order {order:.3f}")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def render_continuation(path, lams, objectives, load_norms):
    """Trend plot of the continuation run: J and dual load norm vs lam."""
    lams = np.asarray(lams, dtype=float)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 3.4))
    ax1.semilogx(lams, objectives, "o-")
    ax1.set_xlabel(r"$\lambda$")
    ax1.set_ylabel("objective")
    ax1.invert_xaxis()
    ax2.semilogx(lams, load_norms, "s-")
    ax2.set_xlabel(r"$\lambda$")
    ax2.set_ylabel(r"load norm $\|\ell\|_{L^2(H^{-1})}$")
    ax2.invert_xaxis()
    fig.tight_layout()
    return _save(fig, path)


def render_trajectory(path, times, stress_norm, dissipation, energy):
    """Time traces of a simulation: stress norm, dissipation, energy."""
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    ax.plot(times, stress_norm, label=r"$\|\sigma\|_{L^2}$")
    ax.plot(times, np.cumsum(dissipation), label="cumulative dissipation")
    ax.plot(times, energy, label="elastic energy")
    ax.set_xlabel("t")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def render_oracle(path, times, stress):
    """The uniaxial benchmark stress curve min(2t, 1)."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(times, stress, "-")
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\sigma(t)$")
    ax.set_title("uniaxial benchmark stress")
    fig.tight_layout()
    return _save(fig, path)
