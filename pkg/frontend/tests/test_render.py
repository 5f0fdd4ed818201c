import pytest

from mimosim_plots.render import PlotSpec, RenderError, load_rows, render

HEADER = ("topology,precoder,allocator,snr_db,ber,ber_ci95,"
          "sum_rate,sum_rate_sem,bits_total,realizations")


def sample_csv(tmp_path, rows=None):
    if rows is None:
        rows = [
            "cf,mf,upa,0.0,0.25,0.01,2.0,0.1,1000,10",
            "cf,mf,upa,10.0,0.1,0.005,4.0,0.1,1000,10",
            "cf,zf,upa,0.0,0.2,0.01,1.5,0.1,1000,10",
            "cf,zf,upa,10.0,0.03333333333333333,0.004,5.5,0.1,1000,10",
            "cf,mmse,upa,0.0,0.15,0.01,2.5,0.1,1000,10",
            "cf,mmse,upa,10.0,0.01,0.002,6.0,0.1,1000,10",
            "mc,mmse,rapa,0.0,0.12,0.01,2.2,0.1,1000,10",
            "mc,mmse,rapa,10.0,0.02,0.003,5.0,0.1,1000,10",
            "cf,mmse,rapa,0.0,0.11,0.01,2.4,0.1,1000,10",
            "cf,mmse,rapa,10.0,0.008,0.002,6.4,0.1,1000,10",
        ]
    path = tmp_path / "results.csv"
    path.write_text(HEADER + "\n" + "\n".join(rows) + "\n")
    return path


class TestLoadRows:
    def test_reads_all_rows(self, tmp_path):
        rows = load_rows(sample_csv(tmp_path))
        assert len(rows) == 10
        assert rows[0]["topology"] == "cf" and rows[0]["ber"] == "0.25"

    def test_missing_file(self, tmp_path):
        with pytest.raises(RenderError, match="not found"):
            load_rows(tmp_path / "nope.csv")

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(RenderError, match="header"):
            load_rows(path)

    def test_short_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(HEADER + "\ncf,zf,upa,0.0\n")
        with pytest.raises(RenderError, match="fields"):
            load_rows(path)


class TestRender:
    def test_ber_three_curves(self, tmp_path):
        spec = PlotSpec(csv_path=sample_csv(tmp_path), kind="ber",
                        out_path=tmp_path / "fig.png", topologies=("cf",), allocators=("upa",))
        image, sidecar = render(spec)
        assert image.is_file() and image.stat().st_size > 0
        lines = sidecar.read_text().splitlines()
        assert len(lines) == 1 + 6     # header + 3 curves x 2 points
        assert {line.split(",")[1] for line in lines[1:]} == {"mf", "zf", "mmse"}

    def test_compare_two_curves(self, tmp_path):
        spec = PlotSpec(csv_path=sample_csv(tmp_path), kind="compare",
                        out_path=tmp_path / "cmp.png", precoders=("mmse",), allocators=("rapa",))
        _, sidecar = render(spec)
        lines = sidecar.read_text().splitlines()[1:]
        assert {line.split(",")[0] for line in lines} == {"cf", "mc"}

    def test_empty_slice_no_file(self, tmp_path):
        out = tmp_path / "nothing.png"
        spec = PlotSpec(csv_path=sample_csv(tmp_path), out_path=out, precoders=("zf",),
                        allocators=("rapa",))
        with pytest.raises(RenderError, match="empty"):
            render(spec)
        assert not out.exists()

    def test_sidecar_values_verbatim(self, tmp_path):
        csv_path = sample_csv(tmp_path)
        spec = PlotSpec(csv_path=csv_path, kind="ber", out_path=tmp_path / "f.png")
        _, sidecar = render(spec)
        source = {}
        for line in csv_path.read_text().splitlines()[1:]:
            parts = line.split(",")
            source[tuple(parts[:4])] = parts[4]
        for line in sidecar.read_text().splitlines()[1:]:
            parts = line.split(",")
            assert source[tuple(parts[:4])] == parts[4]

    def test_sumrate_kind_uses_rate_column(self, tmp_path):
        spec = PlotSpec(csv_path=sample_csv(tmp_path), kind="sumrate",
                        out_path=tmp_path / "rate.png", topologies=("cf",),
                        precoders=("mmse",), allocators=("upa",))
        _, sidecar = render(spec)
        lines = sidecar.read_text().splitlines()
        assert lines[0].endswith("sum_rate")
        assert lines[1].split(",")[4] == "2.5"

    def test_zero_ber_on_log_scale(self, tmp_path):
        rows = ["cf,zf,upa,0.0,0.1,0.01,1.0,0.0,100,1",
                "cf,zf,upa,10.0,0.0,0.0,2.0,0.0,100,1"]
        spec = PlotSpec(csv_path=sample_csv(tmp_path, rows), out_path=tmp_path / "z.png")
        _, sidecar = render(spec)
        # the zero point is still dumped even though the log axis drops it
        assert sidecar.read_text().splitlines()[-1].endswith(",0.0")

    def test_rerender_identical_sidecar(self, tmp_path):
        spec = PlotSpec(csv_path=sample_csv(tmp_path), out_path=tmp_path / "d.png")
        _, s1 = render(spec)
        first = s1.read_bytes()
        _, s2 = render(spec)
        assert s2.read_bytes() == first

    def test_unknown_kind_rejected(self, tmp_path):
        with pytest.raises(RenderError, match="kind"):
            PlotSpec(csv_path="x.csv", kind="pie")
