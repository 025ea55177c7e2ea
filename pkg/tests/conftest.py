import os

import pytest


def pytest_collection_modifyitems(config, items):
    if os.environ.get("EHLTVD_LONG") == "1":
        return
    skip = pytest.mark.skip(reason="set EHLTVD_LONG=1 to run the 1025^2 reproduction")
    for item in items:
        if "long" in item.keywords:
            item.add_marker(skip)
