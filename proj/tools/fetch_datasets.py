#!/usr/bin/env python3
"""Rebuild data/telco_churn.csv and data/adult.csv from public PyPI wheels.

The Telco customer churn table ships inside the evalml wheel and the UCI
Adult training split ships inside the responsibly wheel. Both are pulled
with `pip download` so the script works behind a package mirror.
"""
import argparse
import csv
import pathlib
import subprocess
import tempfile
import zipfile

ADULT_HEADER = [
    "age", "workclass", "fnlwgt", "education", "education-num",
    "marital-status", "occupation", "relationship", "race", "sex",
    "capital-gain", "capital-loss", "hours-per-week", "native-country",
    "income",
]


def download(pkg: str, dest: pathlib.Path) -> pathlib.Path:
    subprocess.run(["pip", "download", pkg, "--no-deps", "-d", str(dest)],
                   check=True, stdout=subprocess.DEVNULL)
    name = pkg.split("==")[0].replace("-", "_")
    return next(dest.glob(f"{name}-*.whl"))


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data"))
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        evalml = zipfile.ZipFile(download("evalml==0.84.0", tmp))
        (out / "telco_churn.csv").write_bytes(evalml.read("evalml/demos/data/churn.csv"))

        resp = zipfile.ZipFile(download("responsibly==0.1.2", tmp))
        raw = resp.read("responsibly/dataset/adult/adult.data").decode()
        rows = [[c.strip() for c in line.split(",")] for line in raw.splitlines() if line.strip()]
        with open(out / "adult.csv", "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(ADULT_HEADER)
            w.writerows(rows)
    print(f"wrote {out}/telco_churn.csv and {out}/adult.csv")


if __name__ == "__main__":
    main()
