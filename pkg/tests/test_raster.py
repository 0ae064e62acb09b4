from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segfuse import (
    CITYSCAPES_19,
    BitMask,
    ClassCatalog,
    ClassDef,
    FormatError,
    Image,
    LabelMap,
    ValidationError,
    decode_label_map,
    encode_label_map,
)
from segfuse.raster import decode_image, decode_mask, encode_image, encode_mask

from .conftest import random_label_map


class TestCatalog:
    def test_default_catalog(self):
        assert len(CITYSCAPES_19) == 19
        assert CITYSCAPES_19.get(13).name == "car"
        assert CITYSCAPES_19.ids == tuple(range(19))

    def test_ids_must_be_contiguous(self):
        with pytest.raises(ValidationError):
            ClassCatalog((ClassDef(1, "a", (0, 0, 0)),))

    def test_sentinel_id_rejected(self):
        classes = tuple(ClassDef(i, f"c{i}", (0, 0, 0)) for i in range(255)) + (
            ClassDef(255, "bad", (0, 0, 0)),
        )
        with pytest.raises(ValidationError):
            ClassCatalog(classes)

    def test_negative_importance_rejected(self):
        with pytest.raises(ValidationError):
            ClassCatalog((ClassDef(0, "a", (0, 0, 0), importance=-1.0),))

    def test_json_round_trip(self):
        assert ClassCatalog.from_json(CITYSCAPES_19.to_json()) == CITYSCAPES_19


class TestLabelMapCodec:
    def test_1x1_round_trip(self):
        m = LabelMap(np.zeros((1, 1), np.uint8))
        assert decode_label_map(encode_label_map(m)) == m

    def test_2x2_round_trip(self):
        m = LabelMap(np.array([[0, 5], [255, 18]], np.uint8))
        assert decode_label_map(encode_label_map(m)) == m

    def test_random_64x64_round_trip(self, rng):
        m = random_label_map(rng, 64, 64, sentinel_prob=0.2)
        out = decode_label_map(encode_label_map(m))
        assert np.array_equal(out.data, m.data)

    def test_decode_inverse_of_encode(self):
        m = LabelMap(np.full((1, 1), 7, np.uint8))
        assert decode_label_map(encode_label_map(m)).data[0, 0] == 7

    def test_truncated_bytes_is_format_error(self):
        b = encode_label_map(LabelMap(np.zeros((4, 4), np.uint8)))
        with pytest.raises(FormatError):
            decode_label_map(b[: len(b) // 2])

    def test_garbage_bytes_is_format_error(self):
        with pytest.raises(FormatError):
            decode_label_map(b"not a png at all")

    def test_out_of_catalog_value_names_pixel(self):
        m = LabelMap(np.array([[0, 0], [0, 19]], np.uint8))
        b = encode_label_map(m)
        with pytest.raises(ValidationError, match=r"19.*row=1.*col=1"):
            decode_label_map(b, CITYSCAPES_19)

    @settings(deadline=None, max_examples=25)
    @given(st.integers(1, 32), st.integers(1, 32), st.integers(0, 2**32 - 1))
    def test_round_trip_property(self, h, w, seed):
        local = np.random.default_rng(seed)
        m = random_label_map(local, h, w, sentinel_prob=0.1)
        assert decode_label_map(encode_label_map(m)) == m


class TestImageCodec:
    def test_round_trip(self, rng):
        img = Image(rng.integers(0, 256, (17, 23, 3)).astype(np.uint8))
        assert decode_image(encode_image(img)) == img

    def test_wrong_mode_rejected(self):
        b = encode_label_map(LabelMap(np.zeros((2, 2), np.uint8)))
        with pytest.raises(FormatError):
            decode_image(b)


class TestMaskCodec:
    def test_round_trip(self, rng):
        mask = BitMask(rng.random((9, 11)) < 0.5)
        assert decode_mask(encode_mask(mask)) == mask

    def test_nonbinary_value_rejected(self):
        import io

        from PIL import Image as PILImage

        buf = io.BytesIO()
        PILImage.fromarray(np.full((2, 2), 7, np.uint8), mode="L").save(buf, format="PNG")
        with pytest.raises(ValidationError):
            decode_mask(buf.getvalue())


class TestInvariants:
    def test_label_map_is_immutable(self):
        m = LabelMap(np.zeros((2, 2), np.uint8))
        with pytest.raises(ValueError):
            m.data[0, 0] = 1

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            LabelMap(np.zeros((2, 2, 2), np.uint8))

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            LabelMap(np.zeros((0, 4), np.uint8))

    def test_validate_accepts_sentinel(self):
        LabelMap(np.full((2, 2), 255, np.uint8)).validate(CITYSCAPES_19)
