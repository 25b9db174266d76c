"""Run the usage examples embedded in module docstrings."""

import doctest

import pytest

from memhtm import device, spatial_pooler


@pytest.mark.parametrize("module", [device, spatial_pooler], ids=lambda m: m.__name__)
def test_docstring_examples(module):
    result = doctest.testmod(module, optionflags=doctest.NORMALIZE_WHITESPACE)
    assert result.attempted > 0 and result.failed == 0
