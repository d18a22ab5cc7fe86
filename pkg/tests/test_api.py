"""The package's public surface stays importable and complete."""

import timbrekit


def test_all_exports_resolve():
    for name in timbrekit.__all__:
        assert getattr(timbrekit, name, None) is not None, name


def test_version_string():
    assert timbrekit.__version__.count(".") == 2
