"""Writes a synthetic price fixture: 5 industries x 5 tickers of weekday closes."""

import argparse
import csv
import datetime as dt

import numpy as np


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="data")
    ap.add_argument("--seed", type=int, default=2021)
    ap.add_argument("--start", default="2018-01-01")
    ap.add_argument("--days", type=int, default=900, help="calendar days")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    industries = ["Tech", "Health", "Energy", "Finance", "Utilities"]
    tickers = [(f"{ind[:3].upper()}{k + 1}", ind) for ind in industries for k in range(5)]
    drift = rng.normal(0.0003, 0.0004, len(tickers))
    vol = rng.uniform(0.008, 0.02, len(tickers))
    industry_factor_vol = 0.006

    start = dt.date.fromisoformat(args.start)
    dates = [start + dt.timedelta(days=d) for d in range(args.days)]
    dates = [d for d in dates if d.weekday() < 5]
    price = np.full(len(tickers), 100.0)
    with open(f"{args.out_dir}/industries.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["ticker", "industry"])
        w.writerows(tickers)
    with open(f"{args.out_dir}/prices.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["date", "ticker", "adj_close"])
        for day in dates:
            shock = np.repeat(rng.normal(0.0, industry_factor_vol, len(industries)), 5)
            price *= 1.0 + drift + shock + vol * rng.standard_normal(len(tickers))
            for (ticker, _), p in zip(tickers, price):
                w.writerow([day.isoformat(), ticker, f"{p:.4f}"])


if __name__ == "__main__":
    main()
