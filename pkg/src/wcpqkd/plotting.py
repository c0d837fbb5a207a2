"""Figures rendered next to the CSV reports. The CSV stays the data contract."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (4.8, 3.4),
    "savefig.bbox": "tight",
}


def plot_fig3(rows, path):
    """Normalized Alice-Eve and Eve-Bob information against transmission rate."""
    ok = [r for r in rows if r["status"] == "ok"]
    t = [r["t"] for r in ok]
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.plot(t, [r["norm_i_ae_42"] for r in ok], "-", color="k", label="4+2  I_AE")
        ax.plot(t, [r["norm_i_eb_42"] for r in ok], "--", color="k", label="4+2  I_EB")
        ax.plot(t, [r["norm_i_ae_2"] for r in ok], ":", color="C0", label="2-state  I_AE")
        ax.plot(t, [r["norm_i_eb_2"] for r in ok], "-.", color="C0", label="2-state  I_EB")
        ax.axhline(1.0, color="0.6", lw=0.6)
        ax.set_xscale("log")
        ax.set_ylim(0, 3)
        ax.set_xlabel("transmission rate t (bit/pulse)")
        ax.set_ylabel("information / 4-state information")
        ax.legend(frameon=False)
        fig.savefig(path)
        plt.close(fig)


def plot_analytic(rows, path):
    with plt.rc_context(RC):
        fig, (ax_t, ax_i) = plt.subplots(1, 2, figsize=(7.2, 3.0))
        for proto in dict.fromkeys(r["protocol"] for r in rows):
            sel = [r for r in rows if r["protocol"] == proto]
            mu = [r["mu"] for r in sel]
            ax_t.plot(mu, [r["t"] for r in sel], label=proto)
            ax_i.plot(mu, [r["i_ae"] for r in sel], label=proto)
        ax_t.set_xlabel("mean photon number")
        ax_t.set_ylabel("transmission rate")
        ax_i.set_xlabel("mean photon number")
        ax_i.set_ylabel("I_AE at eta = 1 (bits)")
        ax_t.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
