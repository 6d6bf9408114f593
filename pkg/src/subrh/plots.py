"""Plot emission for run records.

Two paths: emit_plots writes self-contained gnuplot scripts (records inlined
as a $DATA block, no rendering dependency), render_plots draws PNGs with
matplotlib. Both read the delimited records written by the CLI and pick up
optional columns (sup_u for kernel probes, map_distance for homotopy
distance runs) when present.
"""

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def _read_records(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ValueError(f"records file {path} is empty")
        rows = [[float(v) for v in row] for row in reader]
    if not rows:
        raise ValueError(f"records file {path} has no data rows")
    return header, rows


def _data_block(rows):
    lines = ["$DATA << EOD"]
    for row in rows:
        lines.append(" ".join("%.17g" % v for v in row))
    lines.append("EOD")
    return "\n".join(lines)


def _sibling_summary(records_path):
    path = os.path.join(os.path.dirname(os.path.abspath(records_path)), "summary.json")
    if not os.path.exists(path):
        return {}
    with open(path) as fh:
        return json.load(fh)


def emit_plots(records_path, out_dir):
    """Write gnuplot scripts next to nothing else; returns the paths written.

    energy_vs_t.gp is always produced; kernel_loglog.gp and distance_vs_t.gp
    appear when the corresponding columns exist. Raises on empty records
    before creating any file.
    """
    header, rows = _read_records(records_path)
    col = {name: i + 1 for i, name in enumerate(header)}  # gnuplot is 1-based
    data = _data_block(rows)
    scripts = []

    energy = "\n".join(
        [
            "set terminal pngcairo size 900,600",
            "set output 'energy_vs_t.png'",
            "set xlabel 't'",
            "set ylabel 'energy'",
            "set key top right",
            data,
            "plot $DATA using {0}:{1} with lines title 'E_H', \\".format(
                col["t"], col["E_H"]
            ),
            "     $DATA using {0}:{1} with lines title 'E_R', \\".format(
                col["t"], col["E_R"]
            ),
            "     $DATA using {0}:{1} with lines title 'E'".format(col["t"], col["E"]),
            "",
        ]
    )
    scripts.append(("energy_vs_t.gp", energy))

    if "sup_u" in col:
        summary = _sibling_summary(records_path)
        label = ""
        if isinstance(summary.get("exponent"), (int, float)):
            label = "set label 1 'fitted slope %.3f' at graph 0.08, 0.12\n" % summary["exponent"]
        kernel = "\n".join(
            [
                "set terminal pngcairo size 900,600",
                "set output 'kernel_loglog.png'",
                "set logscale xy",
                "set xlabel 't'",
                "set ylabel 'sup u(t)'",
                label + data,
                "plot $DATA using {0}:{1} with linespoints title 'sup u'".format(
                    col["t"], col["sup_u"]
                ),
                "",
            ]
        )
        scripts.append(("kernel_loglog.gp", kernel))

    if "map_distance" in col:
        dist = "\n".join(
            [
                "set terminal pngcairo size 900,600",
                "set output 'distance_vs_t.png'",
                "set xlabel 't'",
                "set ylabel 'sup distance'",
                data,
                "plot $DATA using {0}:{1} with lines title 'map distance'".format(
                    col["t"], col["map_distance"]
                ),
                "",
            ]
        )
        scripts.append(("distance_vs_t.gp", dist))

    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name, text in scripts:
        path = os.path.join(out_dir, name)
        with open(path, "w") as fh:
            fh.write(text)
        written.append(path)
    return written


def render_plots(records_path, out_dir):
    """Render the same record views as PNG files; returns the paths written."""
    header, rows = _read_records(records_path)
    arr = np.array(rows)
    col = {name: i for i, name in enumerate(header)}
    os.makedirs(out_dir, exist_ok=True)
    written = []
    t = arr[:, col["t"]]

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    ax.plot(t, arr[:, col["E_H"]], label="E_H")
    ax.plot(t, arr[:, col["E_R"]], label="E_R")
    ax.plot(t, arr[:, col["E"]], label="E", linestyle="--")
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.legend()
    fig.tight_layout()
    path = os.path.join(out_dir, "energy.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    if "sup_u" in col and len(rows) > 1:
        sup = arr[:, col["sup_u"]]
        fig, ax = plt.subplots(figsize=(6.4, 4.8))
        ax.loglog(t, sup, "o-", label="sup u")
        slope, intercept = np.polyfit(np.log(t), np.log(sup), 1)
        ax.loglog(t, np.exp(intercept) * t ** slope, "--", label=f"slope {slope:.2f}")
        ax.set_xlabel("t")
        ax.set_ylabel("sup u(t)")
        ax.legend()
        fig.tight_layout()
        path = os.path.join(out_dir, "kernel.png")
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    if "map_distance" in col:
        fig, ax = plt.subplots(figsize=(6.4, 4.8))
        ax.plot(t, arr[:, col["map_distance"]])
        ax.set_xlabel("t")
        ax.set_ylabel("sup distance")
        fig.tight_layout()
        path = os.path.join(out_dir, "distance.png")
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    return written
