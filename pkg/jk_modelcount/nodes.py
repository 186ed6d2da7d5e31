"""
Model Counting Nodes for ComfyUI

Approximate projected model counting, density schedule tables and prefix
hash dumps as workflow nodes. Errors never raise into the graph: every node
reports is_valid / error_message outputs instead.
"""

import json

from .counter import COUNTER_SCHEDULES, CounterParams, approxmc5
from .density import build_schedule, density_table, table_to_csv
from .errors import ModelCountError
from .formula import XorEncoding, parse_dimacs
from .hashgen import dump_hash, iteration_rng, sample_prefix_hash
from .oracle import OracleConfig

SAMPLE_DIMACS = "p cnf 3 1\n1 2 3 0\n"


class ApproxModelCount:
    """
    Approximate the number of models of a DIMACS CNF, projected onto its
    `c ind` variables.

    Small formulas (fewer than iniThresh models) are counted exactly.
    """

    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {
                "dimacs": ("STRING", {
                    "default": SAMPLE_DIMACS,
                    "multiline": True
                }),
                "epsilon": ("FLOAT", {
                    "default": 0.8,
                    "min": 0.01,
                    "max": 10.0,
                    "step": 0.01
                }),
                "delta": ("FLOAT", {
                    "default": 0.2,
                    "min": 0.001,
                    "max": 1.0,
                    "step": 0.001
                }),
            },
            "optional": {
                "schedule": (list(COUNTER_SCHEDULES), {
                    "default": "lsa"
                }),
                "rho": ("FLOAT", {
                    "default": 1.1,
                    "min": 1.01,
                    "max": 10.0,
                    "step": 0.01
                }),
                "qs": ("INT", {
                    "default": 1,
                    "min": 1,
                    "max": 4096,
                    "step": 1
                }),
                "seed": ("INT", {
                    "default": 1,
                    "min": 0,
                    "max": 0xFFFFFFFF,
                    "step": 1
                }),
                "improved_t": ("BOOLEAN", {
                    "default": False
                }),
                "xor_mode": ("STRING", {
                    "default": "native",  # or tseitin:<width>
                    "multiline": False
                }),
            }
        }

    RETURN_TYPES = ("STRING", "FLOAT", "STRING", "BOOLEAN", "STRING")
    RETURN_NAMES = ("estimate", "log2_estimate", "report_json", "is_valid", "error_message")
    FUNCTION = "count_models"
    CATEGORY = "JK-ModelCounter/count"

    def count_models(self, dimacs, epsilon=0.8, delta=0.2, schedule="lsa", rho=1.1, qs=1, seed=1,
                     improved_t=False, xor_mode="native"):
        """
        Run the counter on DIMACS text.

        Args:
            dimacs: DIMACS CNF text, optionally with `c ind` and `x` lines
            epsilon: tolerance
            delta: confidence
            schedule: dense, lsa, solved or theoretical
            rho: dispersion target
            qs: first concentrated prefix
            seed: master seed
            improved_t: binomial-tail iteration count
            xor_mode: native or tseitin:<width>

        Returns:
            tuple: (estimate, log2_estimate, report_json, is_valid, error_message)
        """
        try:
            formula = parse_dimacs(dimacs)
            params = CounterParams(
                epsilon=epsilon, delta=delta, rho=rho, qs=qs, schedule_kind=schedule,
                master_seed=seed, improved_t=improved_t,
            )
            oracle = OracleConfig(xor_mode=XorEncoding.parse(xor_mode))
            estimate = approxmc5(formula, params, oracle)
        except ModelCountError as e:
            return ("", 0.0, "{}", False, str(e))

        # Counts can exceed INT range, so the estimate travels as text
        log2_estimate = estimate.log2_value if estimate.log2_value is not None else 0.0
        report = json.dumps(estimate.to_dict(include_timing=False), indent=2, sort_keys=True)
        return (str(estimate.value), float(log2_estimate), report, True, "")


class DensityScheduleTable:
    """CSV comparing the lsa, solved and theoretical density schedules."""

    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {
                "n": ("INT", {
                    "default": 32,
                    "min": 1,
                    "max": 1024,
                    "step": 1
                }),
            },
            "optional": {
                "k": ("INT", {
                    "default": 512,
                    "min": 2,
                    "max": 1 << 20,
                    "step": 1
                }),
                "rho": ("FLOAT", {
                    "default": 1.1,
                    "min": 1.01,
                    "max": 10.0,
                    "step": 0.01
                }),
                "qs": ("INT", {
                    "default": 1,
                    "min": 1,
                    "max": 1024,
                    "step": 1
                }),
            }
        }

    RETURN_TYPES = ("STRING", "INT", "BOOLEAN", "STRING")
    RETURN_NAMES = ("csv", "qs_lsa", "is_valid", "error_message")
    FUNCTION = "build_table"
    CATEGORY = "JK-ModelCounter/density"

    def build_table(self, n, k=512, rho=1.1, qs=1):
        """
        Returns:
            tuple: (csv, qs_lsa, is_valid, error_message); qs_lsa is -1 when
            no prefix of the lsa schedule meets rho
        """
        try:
            rows, qs_lsa = density_table(n, k=k, rho=rho, qs=qs)
        except ModelCountError as e:
            return ("", -1, False, str(e))
        return (table_to_csv(rows), -1 if qs_lsa is None else qs_lsa, True, "")


class PrefixHashDump:
    """
    Sample one prefix hash and print its rows as XOR constraints.

    Same seed and schedule give the same hash as iteration 0 of a counter run
    over n projected variables.
    """

    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {
                "n": ("INT", {
                    "default": 8,
                    "min": 1,
                    "max": 1024,
                    "step": 1
                }),
                "schedule": (list(COUNTER_SCHEDULES), {
                    "default": "lsa"
                }),
            },
            "optional": {
                "m": ("INT", {
                    "default": 0,  # 0 = all rows
                    "min": 0,
                    "max": 1024,
                    "step": 1
                }),
                "seed": ("INT", {
                    "default": 1,
                    "min": 0,
                    "max": 0xFFFFFFFF,
                    "step": 1
                }),
                "k": ("INT", {
                    "default": 512,
                    "min": 2,
                    "max": 1 << 20,
                    "step": 1
                }),
            }
        }

    RETURN_TYPES = ("STRING", "STRING", "BOOLEAN", "STRING")
    RETURN_NAMES = ("hash_dump", "row_weights", "is_valid", "error_message")
    FUNCTION = "dump_prefix_hash"
    CATEGORY = "JK-ModelCounter/hash"

    def dump_prefix_hash(self, n, schedule="lsa", m=0, seed=1, k=512):
        try:
            if m > n:
                raise ModelCountError(f"m={m} exceeds n={n}")
            density = build_schedule(schedule, n, k=k)
            h = sample_prefix_hash(n, density, tuple(range(1, n + 1)), iteration_rng(seed, 0), seed=(seed, 0))
        except ModelCountError as e:
            return ("", "[]", False, str(e))

        rows = m if m > 0 else n
        weights = [int(w) for w in h.row_weights()[:rows]]
        return (dump_hash(h, rows), json.dumps(weights), True, "")
