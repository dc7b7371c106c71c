import importlib.util
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from PIL import Image

settings.register_profile(
    "emfe", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("emfe")

_SCRIPTS = Path(__file__).resolve().parent.parent / "scripts"


def load_script(name: str):
    """Import a file from scripts/ as a module (they are not a package)."""
    spec = importlib.util.spec_from_file_location(name, _SCRIPTS / f"{name}.py")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory) -> Path:
    """Small two-class PNG tree with cell-like blobs (60 per class)."""
    gen = load_script("make_synthetic_dataset")
    root = tmp_path_factory.mktemp("cells")
    rng = np.random.default_rng(4242)
    for class_dir, parasitized in (("Parasitized", True), ("Uninfected", False)):
        d = root / class_dir
        d.mkdir()
        for i in range(60):
            img = gen.make_cell(rng, parasitized)
            Image.fromarray(img, mode="RGB").save(d / f"cell_{i:05d}.png")
    return root


@pytest.fixture(scope="session")
def synth_table(synth_root):
    from emfe.dataset import ingest

    return ingest(synth_root, polarity="auto", connectivity=8, workers=1)


@pytest.fixture(scope="session")
def synth_csv(synth_table, tmp_path_factory) -> Path:
    from emfe.dataset import save_table

    path = tmp_path_factory.mktemp("csv") / "features.csv"
    save_table(synth_table, path)
    return path
