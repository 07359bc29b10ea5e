import pytest

from axgen import datagen, datio
from axgen.qarith import BitConfig


@pytest.fixture(scope="session")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("csv")
    for name, gen in datagen.GENERATORS.items():
        header, rows = gen()
        datagen.write_csv(d / f"{name}.csv", header, rows)
    header, rows = datagen.blobs_table()
    datagen.write_csv(d / "blobs.csv", header, rows)
    return d


@pytest.fixture(scope="session")
def blobs_ds(data_dir):
    raw = datio.load_csv(data_dir / "blobs.csv")
    return datio.prepare_dataset(raw, "blobs", w_in=4, train_frac=0.7, seed=0)


@pytest.fixture(scope="session")
def bc_ds(data_dir):
    raw = datio.load_csv(data_dir / "breast_cancer.csv")
    return datio.prepare_dataset(raw, "breast_cancer", w_in=4, train_frac=0.7, seed=0)


@pytest.fixture(scope="session")
def rw_ds(data_dir):
    raw = datio.load_csv(data_dir / "redwine.csv")
    return datio.prepare_dataset(raw, "redwine", w_in=4, train_frac=0.7, seed=0)


@pytest.fixture(scope="session")
def default_bits():
    return BitConfig(w_in=4, w_hidden=8, n_bits=8)
