import concurrent.futures
import contextlib
import itertools
import json
import logging
import os

import numpy as np
import pandas as pd
from dotenv import dotenv_values


def setup_config(env_file_var="ENVFILE", env_file_default=".env.local"):
    return dotenv_values(os.getenv(env_file_var, env_file_default))


def setup_logger(
    logger_name,
    config,
    log_level_var="SGOSC_LOG_LEVEL",
    log_level_default="DEBUG",
):
    logger = logging.getLogger(logger_name)
    logger.setLevel(
        getattr(logging, config.get(log_level_var, log_level_default))
    )
    return logger


config = setup_config()
logger = setup_logger(__name__, config)


def get_threads(config, threads_var="SGOSC_THREADS", threads_default=1):
    value = os.getenv(threads_var) or config.get(threads_var)
    if value is None:
        return threads_default
    threads = int(value)
    if threads < 1:
        raise ValueError(f"{threads_var} must be positive, got {value}")
    return threads


def get_seed(config, seed_var="SGOSC_SEED", seed_default=0):
    value = os.getenv(seed_var) or config.get(seed_var)
    return seed_default if value is None else int(value)


@contextlib.contextmanager
def worker_pool(threads=None):
    threads = get_threads(config) if threads is None else threads
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        yield pool


def parallel_map(func, items, threads=None):
    """Map over items in the worker pool, results in input order."""
    items = list(items)
    if not items:
        return []
    with worker_pool(threads) as pool:
        return list(pool.map(func, items))


def dyadic_radii(lo, hi, include_zero=False):
    radii = 2.0 ** np.arange(lo, hi + 1)
    if include_zero:
        return np.concatenate([[0.0], radii])
    return radii


def special_directions(k):
    """Coordinate axes and the diagonals between pairs of axes."""
    eye = np.eye(k)
    axes = [sign * eye[i] for i in range(k) for sign in (1.0, -1.0)]
    diagonals = [
        (s1 * eye[i] + s2 * eye[j]) / np.sqrt(2.0)
        for i, j in itertools.combinations(range(k), 2)
        for s1, s2 in itertools.product((1.0, -1.0), repeat=2)
    ]
    return np.array(axes + diagonals)


def sphere_directions(k, count, seed=0):
    """Deterministic direction set on S^{k-1}, shape (n, k).

    Refining `count` yields a superset of the coarser set.
    """
    if k == 0:
        return np.zeros((1, 0))
    if k == 1:
        return np.array([[1.0], [-1.0]])
    if k == 2:
        angles = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(angles), np.sin(angles)], axis=1)
    special = special_directions(k)
    extra = count - len(special)
    if extra <= 0:
        return special
    draws = np.random.default_rng(seed).standard_normal((extra, k))
    draws /= np.linalg.norm(draws, axis=1, keepdims=True)
    return np.concatenate([special, draws])


def tangent_basis(direction):
    """Orthonormal basis of the tangent space of the sphere at direction."""
    k = direction.shape[0]
    if k < 2:
        return np.zeros((0, k))
    q, _r = np.linalg.qr(
        np.concatenate([direction[:, None], np.eye(k)], axis=1)
    )
    basis = q[:, 1:k].T
    return basis


def chunks(total, size):
    for start in range(0, total, size):
        yield slice(start, min(start + size, total))


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(key): to_jsonable(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        if np.isfinite(value):
            return value
        return str(value)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if hasattr(obj, "to_json"):
        return obj.to_json()
    return obj


def dump_json(obj):
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2)


def write_json(obj, path):
    with open(path, "w") as f:
        f.write(dump_json(obj))
        f.write("\n")
    logger.info(f"Wrote {path}")


def write_csv(df: pd.DataFrame, path):
    df.to_csv(path, index=False, float_format="%.12g")
    logger.info(f"Wrote {path} ({df.shape[0]} rows)")
