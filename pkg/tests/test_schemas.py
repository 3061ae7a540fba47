"""Every serialized result validates against its published JSON Schema."""

import json
import os
import warnings

import jsonschema
import numpy as np
import pytest

SCHEMA_DIR = os.path.join(os.path.dirname(__file__), "..", "schemas")


def _load(name):
    with open(os.path.join(SCHEMA_DIR, f"{name}.schema.json")) as fh:
        return json.load(fh)


@pytest.fixture(scope="module")
def resolver():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return jsonschema.RefResolver(
            base_uri=f"file://{os.path.abspath(SCHEMA_DIR)}/", referrer=None)


def validate(payload, name, resolver):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        jsonschema.validate(payload, _load(name), resolver=resolver)


def test_all_result_types_validate(free_spec, table_d2, cone_d2, resolver):
    from selfwalk.coarse import irreducible_decompose, skeleton_attractive
    from selfwalk.enumeration import hitting_gf, partition_function
    from selfwalk.geometry import WulffShape
    from selfwalk.paths import LatticePath
    from selfwalk.phase import classify_phase, free_energy, rate_function
    from selfwalk.potentials import GCParams
    from selfwalk.sampler import ChainConfig, mcmc_sample
    from selfwalk.serialize import dumps

    p = LatticePath(np.array([[0, 0], [1, 0], [1, 1], [2, 1], [3, 1]]))
    cases = [
        (partition_function(free_spec, [0.1, 0.0], 4), "EnumerationResult"),
        (hitting_gf(free_spec, [1, 0], 2.0, 8), "GFResult"),
        (table_d2, "NormTable"),
        (WulffShape(table_d2), "WulffShape"),
        (skeleton_attractive(p, 2.0, table_d2), "Skeleton"),
        (irreducible_decompose(p, cone_d2), "IrreducibleDecomposition"),
        (mcmc_sample(free_spec, ChainConfig(
            n=6, params=GCParams(np.zeros(2), 0.0), sweeps=60, burn_in=10,
            thinning=2, seed=0)), "ChainStats"),
        (free_energy(free_spec, [0.2, 0.0], 6), "FreeEnergyEstimate"),
        (rate_function(free_spec, [0.2, 0.0], [[0.1, 0.0]],
                       np.linspace(-1, 1, 11).reshape(-1, 1)
                       @ np.array([[1.0, 0.0]]), 6), "RateFunctionTable"),
        (classify_phase(free_spec, [0.0, 0.0]), "PhaseReport"),
    ]
    for obj, name in cases:
        payload = json.loads(dumps(obj))
        validate(payload, name, resolver)


def test_fixture_products_validate(resolver):
    fixtures = os.path.join(os.path.dirname(__file__), "..", "plotkit", "fixtures")
    pairs = [
        ("enumeration.json", "EnumerationResult"),
        ("norm_table.json", "NormTable"),
        ("wulff.json", "WulffShape"),
        ("skeleton.json", "Skeleton"),
    ]
    for fname, sname in pairs:
        with open(os.path.join(fixtures, fname)) as fh:
            validate(json.load(fh), sname, resolver)
