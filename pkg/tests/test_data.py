"""
Testes das fontes de dados: conjunto sintético, formato IDX e partições.
"""
import dataclasses
import gzip
import struct

import numpy as np
import pytest

from raq.extractors.dataset_loader import load_dataset
from raq.extractors.idx_reader import idx_bytes, parse_idx, read_idx, write_idx
from raq.extractors.synthetic_shapes import gen_synthetic_shapes
from raq.untils.errors import CodebookFormatError, ConfigError, ShapeError


class TestSyntheticShapes:
    def test_deterministic_for_seed(self):
        np.testing.assert_array_equal(gen_synthetic_shapes(20, seed=3), gen_synthetic_shapes(20, seed=3))

    def test_seed_changes_images(self):
        assert not np.array_equal(gen_synthetic_shapes(5, seed=0), gen_synthetic_shapes(5, seed=1))

    def test_range_and_mean(self):
        images = gen_synthetic_shapes(200, 16, seed=0)
        assert images.shape == (200, 16, 16)
        assert images.dtype == np.float32
        assert images.min() >= 0.0 and images.max() <= 1.0
        assert 0.05 <= float(images.mean()) <= 0.6

    def test_every_image_has_a_shape(self):
        images = gen_synthetic_shapes(50, seed=2)
        assert np.all(images.reshape(50, -1).max(axis=1) >= 0.3)

    def test_larger_images(self):
        assert gen_synthetic_shapes(3, 32, seed=0).shape == (3, 32, 32)

    def test_minimum_size(self):
        with pytest.raises(ConfigError):
            gen_synthetic_shapes(3, 8)


class TestIdx:
    def _payload(self) -> bytes:
        header = b"\x00\x00\x08\x03" + struct.pack(">III", 2, 2, 3)
        return header + bytes([0, 51, 102, 153, 204, 255, 255, 0, 0, 0, 0, 255])

    def test_handcrafted_file(self):
        images = parse_idx(self._payload())
        assert images.shape == (2, 2, 3)
        assert images.dtype == np.float32
        np.testing.assert_allclose(images[0, 0], [0.0, 0.2, 0.4])
        np.testing.assert_allclose(images[1, 1], [0.0, 0.0, 1.0])

    def test_wrong_magic(self):
        payload = b"\x00\x00\x08\x01" + self._payload()[4:]
        with pytest.raises(CodebookFormatError, match="Magic"):
            parse_idx(payload)

    def test_truncated(self):
        with pytest.raises(CodebookFormatError, match="truncado"):
            parse_idx(self._payload()[:-1])

    def test_trailing_bytes(self):
        with pytest.raises(CodebookFormatError, match="sobrando"):
            parse_idx(self._payload() + b"\x00")

    def test_write_then_read(self, tmp_path):
        images = np.arange(2 * 16 * 16, dtype=np.float64).reshape(2, 16, 16) % 256 / 255.0
        write_idx(images, tmp_path / "imgs.idx")
        np.testing.assert_allclose(read_idx(tmp_path / "imgs.idx"), images, atol=1e-6)

    def test_gzip_file(self, tmp_path):
        path = tmp_path / "imgs.idx.gz"
        with gzip.open(path, "wb") as handle:
            handle.write(self._payload())
        np.testing.assert_array_equal(read_idx(path), parse_idx(self._payload()))

    def test_encoding_rounds_to_nearest(self):
        payload = idx_bytes(np.array([[[0.5, 1.2, -0.1]]]))
        assert payload[-3:] == bytes([128, 255, 0])

    def test_encoding_requires_3d(self):
        with pytest.raises(ShapeError):
            idx_bytes(np.zeros((4, 4)))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_idx(tmp_path / "nada.idx")


class TestLoadDataset:
    def test_synthetic_split(self, tiny_config):
        train, held_out = load_dataset(tiny_config)
        assert train.shape == (32, 16, 16)
        assert held_out.shape == (16, 16, 16)
        everything = gen_synthetic_shapes(48, 16, tiny_config.data_seed)
        np.testing.assert_array_equal(held_out, everything[-16:])

    def test_idx_split(self, tmp_path, tiny_config):
        write_idx(gen_synthetic_shapes(20, 16, seed=0), tmp_path / "imgs.idx")
        config = dataclasses.replace(tiny_config, dataset="idx", data_path=str(tmp_path / "imgs.idx"), eval_images=5)
        train, held_out = load_dataset(config)
        assert (train.shape[0], held_out.shape[0]) == (15, 5)

    def test_idx_image_size_mismatch(self, tmp_path, tiny_config):
        write_idx(np.zeros((20, 8, 8)), tmp_path / "small.idx")
        config = dataclasses.replace(tiny_config, dataset="idx", data_path=str(tmp_path / "small.idx"))
        with pytest.raises(ShapeError):
            load_dataset(config)

    def test_not_enough_images(self, tmp_path, tiny_config):
        write_idx(np.zeros((10, 16, 16)), tmp_path / "few.idx")
        config = dataclasses.replace(tiny_config, dataset="idx", data_path=str(tmp_path / "few.idx"), eval_images=10)
        with pytest.raises(ConfigError):
            load_dataset(config)
