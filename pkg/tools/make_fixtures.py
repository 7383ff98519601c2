"""Regenerate the synthetic stand-ins for the Dow Jones Index and Bank Marketing datasets.

Row counts and column names follow the public UCI files; the values are
synthetic. Run from the repository root:

    python tools/make_fixtures.py
"""
import csv
import datetime as dt
import math
import random
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "mcruntime" / "fixtures"

STOCKS = ["AA", "AXP", "BA", "BAC", "CAT", "CSCO", "CVX", "DD", "DIS", "GE",
          "HD", "HPQ", "IBM", "INTC", "JNJ", "JPM", "KRFT", "KO", "MCD", "MMM",
          "MRK", "MSFT", "PFE", "PG", "T", "TRV", "UTX", "VZ", "WMT", "XOM"]
JOBS = ["admin.", "blue-collar", "entrepreneur", "housemaid", "management", "retired",
        "self-employed", "services", "student", "technician", "unemployed", "unknown"]


def dow_jones(rng: random.Random) -> None:
    start = dt.date(2011, 1, 7)
    with (OUT / "dow_jones_index.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["quarter", "stock", "date", "open", "high", "low", "close", "volume"])
        for quarter, weeks in ((1, range(0, 12)), (2, range(12, 25))):
            for stock in STOCKS:
                price = rng.uniform(15, 170)
                base_volume = math.exp(rng.uniform(15.0, 19.5))
                for week in weeks:
                    day = start + dt.timedelta(weeks=week)
                    open_ = price
                    close = max(1.0, open_ * math.exp(rng.gauss(0, 0.03)))
                    high = max(open_, close) * (1 + abs(rng.gauss(0, 0.01)))
                    low = min(open_, close) * (1 - abs(rng.gauss(0, 0.01)))
                    volume = int(base_volume * math.exp(rng.gauss(0, 0.35)))
                    w.writerow([quarter, stock, f"{day.month}/{day.day}/{day.year}",
                                f"${open_:.2f}", f"${high:.2f}", f"${low:.2f}", f"${close:.2f}", volume])
                    price = close


def bank_marketing(rng: random.Random) -> None:
    with (OUT / "bank_marketing.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["age", "job", "marital", "balance", "duration", "y"])
        for _ in range(4521):
            balance = int(rng.gammavariate(0.6, 2400))
            w.writerow([rng.randint(19, 87), rng.choice(JOBS),
                        rng.choice(["married", "single", "divorced"]), balance,
                        int(rng.expovariate(1 / 260)), rng.choice(["no"] * 8 + ["yes"])])


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    dow_jones(random.Random(750))
    bank_marketing(random.Random(4521))
