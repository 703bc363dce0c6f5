#!/usr/bin/env python3
"""Download the public UCI datasets and convert them to the shipped schema layouts.

Usage: python3 scripts/fetch_datasets.py --out data/ [--only german_credit adult diabetes130]

The CSVs are not vendored; this script writes <out>/<name>.csv alongside a copy
of the matching schema file so a run config can point at both.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import shutil
import urllib.request
import zipfile
from importlib import resources
from pathlib import Path

log = logging.getLogger("fetch_datasets")

UCI = "https://archive.ics.uci.edu"
URLS = {
    "german_credit": [f"{UCI}/ml/machine-learning-databases/statlog/german/german.data"],
    "adult": [f"{UCI}/ml/machine-learning-databases/adult/adult.data",
              f"{UCI}/ml/machine-learning-databases/adult/adult.test"],
    "diabetes130": [f"{UCI}/static/public/296/diabetes+130-us+hospitals+for+years+1999-2008.zip"],
}

GERMAN_RAW = ["checking_status", "duration", "credit_history", "purpose", "credit_amount", "savings",
              "employment", "installment_rate", "personal_status", "other_debtors", "residence_since",
              "property", "age", "other_installment_plans", "housing", "existing_credits", "job",
              "num_dependents", "telephone", "foreign_worker", "class"]
# A92 = female divorced/separated/married, A95 = female single; the rest are male codes.
GERMAN_FEMALE = {"A92", "A95"}

ADULT_RAW = ["age", "workclass", "fnlwgt", "education", "education_num", "marital_status", "occupation",
             "relationship", "race", "sex", "capital_gain", "capital_loss", "hours_per_week",
             "native_country", "income"]


def _get(url: str) -> bytes:
    log.info("downloading %s", url)
    with urllib.request.urlopen(url, timeout=120) as resp:
        return resp.read()


def _schema_columns(name: str) -> list[str]:
    doc = json.loads(resources.files("rai_scoring").joinpath(f"schemas/{name}.json").read_text())
    return [c["name"] for c in doc["columns"]]


def convert_german(blobs: list[bytes]) -> list[dict]:
    rows = []
    for line in blobs[0].decode("ascii").splitlines():
        if not line.strip():
            continue
        rec = dict(zip(GERMAN_RAW, line.split()))
        rec["sex"] = "female" if rec.pop("personal_status") in GERMAN_FEMALE else "male"
        rec["credit_risk"] = "good" if rec.pop("class") == "1" else "bad"
        rows.append(rec)
    return rows


def convert_adult(blobs: list[bytes]) -> list[dict]:
    rows = []
    for blob in blobs:
        for line in blob.decode("ascii").splitlines():
            if not line.strip() or line.startswith("|"):
                continue
            rec = dict(zip(ADULT_RAW, (v.strip() for v in line.split(","))))
            rec["income"] = rec["income"].rstrip(".")  # the test split ends labels with '.'
            rows.append(rec)
    return rows


def convert_diabetes(blobs: list[bytes]) -> list[dict]:
    with zipfile.ZipFile(io.BytesIO(blobs[0])) as zf:
        member = next(n for n in zf.namelist() if n.endswith("diabetic_data.csv"))
        text = zf.read(member).decode("utf-8")
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        # lab results that were not taken are a real category, not a missing value
        for col in ("max_glu_serum", "A1Cresult"):
            if rec.get(col, "") in ("", "NA"):
                rec[col] = "None"
        rec["readmitted_30"] = "yes" if rec["readmitted"] == "<30" else "no"
        rows.append(rec)
    return rows


CONVERTERS = {"german_credit": convert_german, "adult": convert_adult, "diabetes130": convert_diabetes}


def fetch(name: str, out: Path) -> Path:
    rows = CONVERTERS[name]([_get(u) for u in URLS[name]])
    cols = _schema_columns(name)
    path = out / f"{name}.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)
    with resources.as_file(resources.files("rai_scoring").joinpath(f"schemas/{name}.json")) as src:
        shutil.copy(src, out / f"{name}.schema.json")
    log.info("wrote %s (%d rows)", path, len(rows))
    return path


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("data"))
    p.add_argument("--only", nargs="+", choices=sorted(CONVERTERS), default=sorted(CONVERTERS))
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args.out.mkdir(parents=True, exist_ok=True)
    for name in args.only:
        fetch(name, args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
