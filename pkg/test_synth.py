import numpy as np
import pandas as pd
import pytest

from errors import InvalidInput, OutputError, ShapeError
from synth import (MMINUS, MPLUS, SQRT3, Dataset, ModelConfig, db_to_linear, derive_seed,
                   draw_latents, generate, make_rng, read_dataset_csv, write_dataset_csv)


@pytest.mark.parametrize("db,linear", [(0, 1.0), (10, 10.0), (20, 100.0), (-10, 0.1)])
def test_db_to_linear(db, linear):
    assert db_to_linear(db) == pytest.approx(linear)


def test_model_config_validation():
    assert ModelConfig(MPLUS, 10, 100).gamma == pytest.approx(10.0)
    with pytest.raises(InvalidInput):
        ModelConfig("mzero", 10, 100)
    with pytest.raises(InvalidInput):
        ModelConfig(MPLUS, float("inf"), 100)
    with pytest.raises(InvalidInput):
        ModelConfig(MPLUS, 10, 1)


def test_generate_is_deterministic():
    cfg = ModelConfig(MMINUS, 5, 50)
    a, b = generate(cfg, 42), generate(cfg, 42)
    c = generate(cfg, 43)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y) and np.array_equal(a.z, b.z)
    assert not np.array_equal(a.x, c.x)
    assert a.L == 50


def test_same_seed_same_latents_across_models():
    mplus = generate(ModelConfig(MPLUS, 0, 30), 9)
    mminus = generate(ModelConfig(MMINUS, 0, 30), 9)
    # both models draw b first; x only differs through the confounder
    assert np.array_equal(mplus.x, mminus.x)
    assert not np.array_equal(mplus.y, mminus.y)


def test_latent_ranges():
    lat = draw_latents(make_rng(3), 5000)
    assert lat.b.min() >= 0 and lat.b.max() < SQRT3
    assert set(np.unique(lat.p)) == {-1.0, 1.0}
    assert set(np.unique(lat.q)) == {-1.0, 1.0}
    assert np.all(np.isfinite(lat.v)) and np.all(np.isfinite(lat.w))
    assert abs(lat.v.mean()) < 0.06 and lat.v.var() == pytest.approx(1.0, rel=0.06)


def test_sign_latents_are_equiprobable():
    lat = draw_latents(make_rng(11), 100_000)
    assert 0.49 <= np.mean(lat.p == 1.0) <= 0.51
    assert 0.49 <= np.mean(lat.q == 1.0) <= 0.51


def test_mplus_confounder_moments():
    ds = generate(ModelConfig(MPLUS, 10, 100_000), 77)
    assert ds.z.mean() == pytest.approx(SQRT3 / 2, rel=0.03)
    assert np.var(ds.z, ddof=1) == pytest.approx(0.25, rel=0.03)


def test_mplus_moments():
    ds = generate(ModelConfig(MPLUS, 10, 100_000), 2024)
    assert np.var(ds.x, ddof=1) == pytest.approx(11.0, rel=0.03)
    assert np.var(ds.y, ddof=1) == pytest.approx(11.0, rel=0.03)
    corr = np.corrcoef(np.vstack([ds.x, ds.y, ds.z]))
    assert np.max(np.abs(corr[np.triu_indices(3, k=1)])) <= 0.02


def test_mminus_moments():
    ds = generate(ModelConfig(MMINUS, 10, 100_000), 2025)
    assert np.var(ds.x, ddof=1) == pytest.approx(11.0, rel=0.03)
    assert np.var(ds.z, ddof=1) == pytest.approx(0.5, rel=0.03)
    corr = np.corrcoef(np.vstack([ds.x, ds.y, ds.z]))
    assert np.max(np.abs(corr[np.triu_indices(3, k=1)])) <= 0.02


def test_models_differ_in_marginal_dependence():
    # M+ shares the amplitude between x and y, M- does not
    mplus = generate(ModelConfig(MPLUS, 20, 20_000), 1)
    mminus = generate(ModelConfig(MMINUS, 20, 20_000), 1)
    assert np.corrcoef(mplus.x ** 2, mplus.y ** 2)[0, 1] > 0.5
    assert abs(np.corrcoef(mminus.x ** 2, mminus.y ** 2)[0, 1]) < 0.05


def test_derive_seed():
    assert derive_seed(7, 0) == derive_seed(7, 0)
    assert derive_seed(7, 0) != derive_seed(7, 1)
    assert derive_seed(7, 0) != derive_seed(8, 0)
    assert derive_seed(7, 0, 1) != derive_seed(7, 0)
    assert 0 <= derive_seed(2 ** 64 - 1, 3) < 2 ** 64
    with pytest.raises(InvalidInput):
        derive_seed(-1, 0)


def test_dataset_validation():
    with pytest.raises(ShapeError):
        Dataset([1.0, 2.0], [1.0, 2.0], [1.0])
    with pytest.raises(InvalidInput):
        Dataset([1.0, np.nan], [1.0, 2.0], [1.0, 2.0])


def test_dataset_csv_round_trip(tmp_path):
    ds = generate(ModelConfig(MPLUS, 10, 25), 5)
    path = write_dataset_csv(ds, tmp_path / "sub" / "data.csv")
    back = read_dataset_csv(path)
    assert np.array_equal(back.x, ds.x) and np.array_equal(back.y, ds.y) and np.array_equal(back.z, ds.z)
    assert path.read_text().splitlines()[0] == "x,y,z"


def test_read_dataset_errors(tmp_path):
    with pytest.raises(OutputError):
        read_dataset_csv(tmp_path / "missing.csv")
    pd.DataFrame({"x": [1.0, 2.0], "y": [3.0, 4.0]}).to_csv(tmp_path / "noz.csv", index=False)
    with pytest.raises(InvalidInput):
        read_dataset_csv(tmp_path / "noz.csv")
    (tmp_path / "text.csv").write_text("x,y,z\n1,2,a\n3,4,5\n")
    with pytest.raises(InvalidInput):
        read_dataset_csv(tmp_path / "text.csv")
    (tmp_path / "empty.csv").write_text("")
    with pytest.raises(InvalidInput):
        read_dataset_csv(tmp_path / "empty.csv")
