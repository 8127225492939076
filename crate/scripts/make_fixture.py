"""Generate data/prices_2020.csv, a synthetic daily price panel.

390 tickers on the NYSE calendar from 2020-02-03 to 2020-07-31. Returns come
from a market factor, eleven sector factors and fat-tailed idiosyncratic
noise, with a crash regime from late February through March.
"""

import itertools
import string
from pathlib import Path

import numpy as np
import pandas as pd

SEED = 20200203
N_TICKERS = 390
N_SECTORS = 11
HOLIDAYS = ["2020-02-17", "2020-04-10", "2020-05-25", "2020-07-03"]


def tickers(rng, n):
    pool = ["".join(p) for k in (3, 4) for p in itertools.product(string.ascii_uppercase, repeat=k)]
    picks = rng.choice(len(pool), size=n, replace=False)
    return sorted(pool[i] for i in picks)


def main():
    rng = np.random.default_rng(SEED)
    days = pd.bdate_range("2020-02-03", "2020-07-31")
    days = days[~days.isin(pd.to_datetime(HOLIDAYS))]
    t = len(days)

    crash = (days >= "2020-02-24") & (days <= "2020-03-23")
    rebound = (days > "2020-03-23") & (days <= "2020-04-30")
    market_mu = np.where(crash, -0.012, np.where(rebound, 0.006, 0.0012))
    market_sd = np.where(crash, 0.045, np.where(rebound, 0.025, 0.012))
    market = market_mu + market_sd * rng.standard_normal(t)

    sector_of = rng.integers(0, N_SECTORS, size=N_TICKERS)
    sector_sd = np.where(crash | rebound, 0.012, 0.006)
    sectors = sector_sd[None, :] * rng.standard_normal((N_SECTORS, t))

    beta = rng.uniform(0.4, 1.6, size=N_TICKERS)
    alpha = rng.normal(0.0004, 0.0008, size=N_TICKERS)
    idio_sd = rng.uniform(0.008, 0.03, size=N_TICKERS)
    idio = idio_sd[:, None] * rng.standard_t(4, size=(N_TICKERS, t)) / np.sqrt(2.0)

    returns = alpha[:, None] + beta[:, None] * market[None, :] + sectors[sector_of] + idio
    returns = np.clip(returns, -0.6, 0.6)
    returns[:, 0] = 0.0

    start = np.exp(rng.uniform(np.log(15.0), np.log(600.0), size=N_TICKERS))
    prices = start[:, None] * np.cumprod(1.0 + returns, axis=1)

    frame = pd.DataFrame(prices.T, index=days.strftime("%Y-%m-%d"), columns=tickers(rng, N_TICKERS))
    frame.index.name = "date"
    out = Path(__file__).resolve().parent.parent / "data" / "prices_2020.csv"
    frame.to_csv(out, float_format="%.4f")
    print(f"wrote {out} ({t} days x {N_TICKERS} tickers)")


if __name__ == "__main__":
    main()
