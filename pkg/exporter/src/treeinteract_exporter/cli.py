"""Command line: export a pickled fitted model to the interchange format."""

from __future__ import annotations

import argparse
import json
import pickle
import sys

from .export import ExportError, RoundtripError, export_model


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="treeinteract-export",
        description="Convert a pickled fitted scikit-learn tree model to the "
        "treeinteract interchange format and verify prediction equivalence.",
    )
    parser.add_argument("--in", dest="model_in", required=True,
                        help="pickle file holding the fitted estimator")
    parser.add_argument("--out", required=True, help="interchange JSON output path")
    parser.add_argument("--probes", type=int, default=100)
    parser.add_argument("--class-index", type=int, default=None, dest="class_index",
                        help="class margin to export for multiclass classifiers")
    parser.add_argument("--probe-data", default=None,
                        help="optional .npy matrix whose column ranges bound the probes")
    args = parser.parse_args(argv)

    try:
        with open(args.model_in, "rb") as fh:
            model = pickle.load(fh)
    except (OSError, pickle.UnpicklingError) as exc:
        print(f"error: cannot read model: {exc}", file=sys.stderr)
        return 2
    probe_data = None
    if args.probe_data:
        import numpy as np

        probe_data = np.load(args.probe_data)
    try:
        report = export_model(
            model,
            args.out,
            class_index=args.class_index,
            n_probes=args.probes,
            probe_data=probe_data,
        )
    except RoundtripError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(report.as_dict()))
    return 0


if __name__ == "__main__":
    sys.exit(main())
