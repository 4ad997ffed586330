import numpy as np
import pytest

from netid.exceptions import FormatError
from netid.fileio import (FORMAT_HEADER, format_network, parse_network, read_dataset,
                          read_network, write_dataset, write_network)
from netid.netmodel import simulate_experiment


def test_bundled_network_pattern(net_all, net_rb):
    assert (net_all.L, net_all.K, net_all.p) == (6, 6, 4)
    assert sorted(net_all.G) == sorted([(0, 3), (1, 4), (2, 0), (2, 4), (3, 1), (4, 0), (4, 5),
                                        (5, 2)])
    assert len(net_all.H) == 11
    np.testing.assert_array_equal(np.diag(net_all.Lambda), [0.1, 0.2, 0.3, 0.4])
    assert net_rb.K == 2 and net_rb.rb_signals() == (0, 1)


def test_network_round_trip(tmp_path, net_all):
    path = tmp_path / "n.net"
    write_network(net_all, path, comment="copy")
    back = read_network(path)
    assert back.G == net_all.G and back.H == net_all.H and back.R == net_all.R
    np.testing.assert_array_equal(back.Lambda, net_all.Lambda)
    assert format_network(back) == format_network(net_all).replace("# copy\n", "")


def test_network_errors_name_the_line():
    text = f"{FORMAT_HEADER}\nL = 2\nK = 0\np = 2\nLambda = [1, 1]\nG[1][1] = [0, 1]\n"
    with pytest.raises(FormatError) as exc:
        parse_network(text, "bad.net")
    assert "bad.net:6" in str(exc.value)
    with pytest.raises(FormatError) as exc:
        parse_network("L = 2\n", "nohdr.net")
    assert "nohdr.net:1" in str(exc.value)
    with pytest.raises(FormatError) as exc:
        parse_network(f"{FORMAT_HEADER}\nL = 2\nK = 0\np = 2\nLambda = [1, 1]\n"
                      f"H[1][1] = [1, oops]\n", "x.net")
    assert "x.net:6" in str(exc.value)


def test_dataset_round_trip(tmp_path, net_rb):
    d = simulate_experiment(net_rb, 50, seed=3)
    path = tmp_path / "d.csv"
    write_dataset(d, path)
    assert path.read_text().splitlines()[0] == f"# {FORMAT_HEADER}"
    back = read_dataset(path)
    np.testing.assert_array_equal(back.w, d.w)
    np.testing.assert_array_equal(back.r, d.r)
    np.testing.assert_array_equal(back.e_true, d.e_true)


def test_dataset_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text(f"# {FORMAT_HEADER}\nt,w1,w2\n0,1.0,2.0\n1,1.0\n")
    with pytest.raises(FormatError) as exc:
        read_dataset(p)
    assert "bad.csv:4" in str(exc.value)
    p.write_text(f"# {FORMAT_HEADER}\nt,w1,x2\n")
    with pytest.raises(FormatError) as exc:
        read_dataset(p)
    assert ":2" in str(exc.value)
