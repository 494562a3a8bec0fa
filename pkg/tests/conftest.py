"""Shared fixtures: the bundled converged wave, loaded once per session."""

from importlib import resources

import pytest

from roadfield.cli import solution_from_csv
from roadfield.model import CutoffProfile


@pytest.fixture(scope="session")
def bundled():
    """(solution, params, profile) for the shipped 320x80 single-species wave."""
    path = resources.files("roadfield") / "fixtures" / "single_eps0.1" / "solution.csv"
    sol, params = solution_from_csv(path.read_text())
    profile = CutoffProfile.for_diffusivity(params.d)
    return sol, params, profile
