#!/usr/local/bin/python3.12

from matching_sparsifier.main import driver

driver()
