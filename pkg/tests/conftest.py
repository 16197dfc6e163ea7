from __future__ import annotations

import numpy as np
import pytest

from scatterlm.forward import IncidenceConfig, Layer, StructureModel, load_structure
from scatterlm.materials import MaterialLibrary, default_materials_dir


@pytest.fixture(scope="session")
def lib():
    return MaterialLibrary()


@pytest.fixture(scope="session")
def si_grating():
    return load_structure(default_materials_dir().parent / "structures" / "si_grating.yaml")


@pytest.fixture(scope="session")
def multilayer():
    return load_structure(default_materials_dir().parent / "structures" / "multilayer.yaml")


@pytest.fixture(scope="session")
def lossless_lib(tmp_path_factory):
    """Two non-absorbing dielectrics, flat dispersion."""
    d = tmp_path_factory.mktemp("lossless")
    for name, n in (("Glass", 1.5), ("HighN", 2.5)):
        with open(d / f"{name}.txt", "w") as fh:
            fh.write("# flat test material\n150 %g 0\n2000 %g 0\n" % (n, n))
    return MaterialLibrary(d)


@pytest.fixture
def tiny_grating():
    """Cheap trapezoid grating for fast pipeline tests."""
    return StructureModel(
        pitch=800.0, ambient="Air", substrate="Si",
        layers=(Layer("trapezoid", "Hgt", "Si", "Air", top_width="TCD", bottom_width="BCD"),),
        parameters=("TCD", "Hgt", "BCD"), name="tiny", n_slices=4, truncation_order=2,
    )


def coarse_incidence(order=2, step=100.0):
    return IncidenceConfig(wavelengths=np.arange(200.0, 800.0 + step / 2, step), truncation_order=order)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
