from collections import Counter

from axgen import datagen


class TestScreeningTable:
    def test_shape_and_balance(self):
        header, rows = datagen.screening_table()
        assert header[-1] == "class"
        assert len(header) == 11
        assert len(rows) == 683
        counts = Counter(r[-1] for r in rows)
        assert counts == {"benign": 444, "malignant": 239}

    def test_integer_feature_range(self):
        _, rows = datagen.screening_table()
        for r in rows[:50]:
            assert all(isinstance(v, int) and 1 <= v <= 10 for v in r[:-1])

    def test_deterministic(self):
        assert datagen.screening_table() == datagen.screening_table()


class TestQualityTable:
    def test_shape_and_grade_distribution(self):
        header, rows = datagen.quality_table()
        assert len(header) == 12
        assert len(rows) == 1599
        counts = Counter(r[-1] for r in rows)
        assert counts == {"3": 9, "4": 53, "5": 681, "6": 638, "7": 199, "8": 19}

    def test_deterministic(self):
        assert datagen.quality_table() == datagen.quality_table()


class TestBlobs:
    def test_shape(self):
        header, rows = datagen.blobs_table(n_per_class=20, n_classes=3)
        assert len(rows) == 60
        assert len(set(r[-1] for r in rows)) == 3


class TestWriteCsv:
    def test_byte_stable(self, tmp_path):
        header, rows = datagen.blobs_table()
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        datagen.write_csv(a, header, rows)
        datagen.write_csv(b, header, rows)
        assert a.read_bytes() == b.read_bytes()
        assert a.read_text().splitlines()[0] == ",".join(header)
