#!/usr/bin/env python3
"""Recompute report metrics from frames.csv and compare with summary.csv.

usage: check_report.py REPORT_DIR [--gate-m 0.10] [--gate-deg 20]
       check_report.py --same-predictions A.csv B.csv
"""

import argparse
import csv
import math
import sys
from pathlib import Path

FRAMES_HEADER = [
    "frame_id", "status", "pred_x", "pred_y", "pred_theta", "true_x", "true_y",
    "true_theta", "pos_err_m", "angle_err_deg", "true_success",
]
SUMMARY_HEADER = [
    "area_m2", "n_frames", "psr", "tsr", "mean_pos_err_m", "mean_angle_err_deg",
    "mean_pos_err_true_m", "psr_tsr_gap", "sec_per_frame",
]


def fail(msg):
    print(f"check_report: {msg}", file=sys.stderr)
    sys.exit(1)


def read_csv(path, header):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0] != header:
        fail(f"{path}: unexpected header {rows[0] if rows else None}")
    return rows[1:]


def wrap(a):
    return math.atan2(math.sin(a), math.cos(a))


def close(a, b, tol):
    return abs(a - b) <= tol


def check_report(d, gate_m, gate_deg):
    frames = read_csv(d / "frames.csv", FRAMES_HEADER)
    summary = read_csv(d / "summary.csv", SUMMARY_HEADER)
    if len(summary) != 1:
        fail(f"expected one summary row, got {len(summary)}")
    s = dict(zip(SUMMARY_HEADER, summary[0]))

    n = len(frames)
    predicted = true_ok = 0
    pos_pred = pos_true = ang_true = 0.0
    for r in frames:
        row = dict(zip(FRAMES_HEADER, r))
        has_pred = row["pred_x"] != ""
        if has_pred != (row["status"] == "success"):
            fail(f"frame {row['frame_id']}: status {row['status']} with pred_x '{row['pred_x']}'")
        if not has_pred:
            if row["true_success"] != "0" or row["pos_err_m"] != "":
                fail(f"frame {row['frame_id']}: failed frame carries errors")
            continue
        px, py, pt = (float(row[k]) for k in ("pred_x", "pred_y", "pred_theta"))
        tx, ty, tt = (float(row[k]) for k in ("true_x", "true_y", "true_theta"))
        pos = float(row["pos_err_m"])
        ang = float(row["angle_err_deg"])
        # Pose columns carry six decimals.
        if not close(pos, math.hypot(px - tx, py - ty), 3e-6):
            fail(f"frame {row['frame_id']}: pos_err {pos} disagrees with the poses")
        if not close(ang, abs(math.degrees(wrap(pt - tt))), 2e-4):
            fail(f"frame {row['frame_id']}: angle_err {ang} disagrees with the poses")
        ok = pos <= gate_m and ang <= gate_deg
        if ok != (row["true_success"] == "1"):
            fail(f"frame {row['frame_id']}: true_success inconsistent with the gates")
        predicted += 1
        pos_pred += pos
        if ok:
            true_ok += 1
            pos_true += pos
            ang_true += ang

    want = {
        "n_frames": n,
        "psr": predicted / n if n else 0.0,
        "tsr": true_ok / n if n else 0.0,
        "mean_pos_err_m": pos_pred / predicted if predicted else 0.0,
        "mean_angle_err_deg": ang_true / true_ok if true_ok else 0.0,
        "mean_pos_err_true_m": pos_true / true_ok if true_ok else 0.0,
    }
    want["psr_tsr_gap"] = want["psr"] - want["tsr"]
    if int(s["n_frames"]) != n:
        fail(f"n_frames {s['n_frames']} != {n}")
    for key in ("psr", "tsr", "mean_pos_err_m", "mean_angle_err_deg", "mean_pos_err_true_m",
                "psr_tsr_gap"):
        if not close(float(s[key]), want[key], 2e-6):
            fail(f"{key}: summary {s[key]} != recomputed {want[key]:.9f}")

    svg = (d / "trajectory.svg").read_text()
    if svg.count("<circle") != predicted:
        fail(f"trajectory.svg has {svg.count('<circle')} circles for {predicted} predictions")
    print(f"{d}: {n} frames, psr {want['psr']:.4f}, tsr {want['tsr']:.4f}: summary consistent")


def same_predictions(a, b):
    ta, tb = Path(a).read_text(), Path(b).read_text()
    if ta != tb:
        fail(f"{a} and {b} differ")
    print(f"{a} == {b}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("report_dir", nargs="?")
    ap.add_argument("--gate-m", type=float, default=0.10)
    ap.add_argument("--gate-deg", type=float, default=20.0)
    ap.add_argument("--same-predictions", nargs=2, metavar="CSV")
    args = ap.parse_args()
    if args.same_predictions:
        same_predictions(*args.same_predictions)
    if args.report_dir:
        check_report(Path(args.report_dir), args.gate_m, args.gate_deg)
    if not args.report_dir and not args.same_predictions:
        ap.error("nothing to check")


if __name__ == "__main__":
    main()
