#!/usr/bin/env python3
"""Convert the published Braille tactile recordings to the crate's CSV layout.

The input is a pickle holding either a pandas DataFrame or a list of
records. Each record needs a letter column and a frames column (frames x 12
taxel values). Output rows are ``label,sample,t0..t11``, one row per frame.

    python3 scripts/convert_zenodo.py data_braille_letters_raw.pkl braille.csv

Use ``--letter-key`` and ``--frames-key`` if the column names differ, and
``--frames N`` to pad (with the last frame) or cut every sample to N frames.
"""

import argparse
import csv
import pickle
import sys


def records(obj, letter_key, frames_key):
    if hasattr(obj, "to_dict"):
        obj = obj.to_dict("records")
    elif isinstance(obj, dict):
        keys = list(obj)
        obj = [dict(zip(keys, row)) for row in zip(*(obj[k] for k in keys))]
    for rec in obj:
        yield str(rec[letter_key]), [[float(v) for v in frame] for frame in rec[frames_key]]


def fit_length(frames, n):
    if n is None:
        return frames
    if len(frames) >= n:
        return frames[:n]
    return frames + [frames[-1]] * (n - len(frames))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--letter-key", default="letter")
    p.add_argument("--frames-key", default="taxel_data")
    p.add_argument("--frames", type=int, default=None)
    args = p.parse_args()

    with open(args.input, "rb") as f:
        data = pickle.load(f)

    n_taxels = None
    n_samples = 0
    with open(args.output, "w", newline="") as f:
        w = csv.writer(f)
        for sample, (letter, frames) in enumerate(records(data, args.letter_key, args.frames_key)):
            frames = fit_length(frames, args.frames)
            if not frames:
                sys.exit(f"sample {sample} has no frames")
            if n_taxels is None:
                n_taxels = len(frames[0])
                w.writerow(["label", "sample"] + [f"t{i}" for i in range(n_taxels)])
            for frame in frames:
                if len(frame) != n_taxels:
                    sys.exit(f"sample {sample}: expected {n_taxels} taxels, got {len(frame)}")
                w.writerow([letter, sample] + [f"{v:g}" for v in frame])
            n_samples += 1
    print(f"{n_samples} samples written to {args.output}")


if __name__ == "__main__":
    main()
