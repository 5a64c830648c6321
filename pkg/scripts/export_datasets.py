"""Write the five benchmark datasets as CSV files under data/.

Iris, Wine, Breast cancer and Digits come from the copies bundled with
scikit-learn. Statlog Vehicle is not bundled there; it is read from the
KEEL-format file shipped inside the ``keel_ds`` wheel (pass its path).

    python scripts/export_datasets.py --keel-wheel keel_ds-0.2.5-py3-none-any.whl
"""
import argparse
import csv
import zipfile
from pathlib import Path

from sklearn import datasets

VEHICLE_MEMBER = "keel_ds/data/balanced/raw/vehicle.dat"
VEHICLE_COLUMNS = [
    "compactness", "circularity", "distance_circularity", "radius_ratio",
    "pr_axis_aspect_ratio", "max_length_aspect_ratio", "scatter_ratio",
    "elongatedness", "pr_axis_rectangularity", "max_length_rectangularity",
    "scaled_variance_major", "scaled_variance_minor", "scaled_radius_of_gyration",
    "skewness_about_major", "skewness_about_minor", "kurtosis_about_major",
    "kurtosis_about_minor", "hollows_ratio",
]
VEHICLE_CLASSES = ["bus", "opel", "saab", "van"]


def _write(path, names, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(names) + ["class"])
        writer.writerows(rows)


def export_sklearn(out):
    loaders = {
        "iris": datasets.load_iris,
        "wine": datasets.load_wine,
        "breast_cancer": datasets.load_breast_cancer,
        "digits": datasets.load_digits,
    }
    for name, loader in loaders.items():
        bunch = loader()
        names = [str(n).replace(" ", "_").replace("(", "").replace(")", "") for n in bunch.feature_names]
        rows = [[repr(float(v)) for v in x] + [int(t)] for x, t in zip(bunch.data, bunch.target)]
        _write(out / f"{name}.csv", names, rows)


def export_vehicle(out, wheel):
    text = zipfile.ZipFile(wheel).read(VEHICLE_MEMBER).decode("utf-8")
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        cells = [c.strip() for c in line.split(",")]
        rows.append([float(c) for c in cells[:-1]] + [VEHICLE_CLASSES.index(cells[-1])])
    _write(out / "vehicle.csv", VEHICLE_COLUMNS, rows)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "data")
    parser.add_argument("--keel-wheel", type=Path, help="path to a keel_ds wheel (for Vehicle)")
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    export_sklearn(args.out)
    if args.keel_wheel:
        export_vehicle(args.out, args.keel_wheel)


if __name__ == "__main__":
    main()
