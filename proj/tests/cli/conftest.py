import pytest


def pytest_addoption(parser):
    parser.addoption("--pepg-bin", required=True, help="path to the pepg executable")
    parser.addoption("--source-dir", required=True, help="repository root")


@pytest.fixture
def pepg_bin(request):
    return request.config.getoption("--pepg-bin")


@pytest.fixture
def source_dir(request):
    return request.config.getoption("--source-dir")
