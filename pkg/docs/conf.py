# -*- coding: utf-8 -*-
# Sphinx build of the foliapyn manual: user guide, command reference and the
# API pages generated from the docstrings of the foliapyn modules.

import pathlib
import re
import sys

DOCS = pathlib.Path(__file__).resolve().parent
sys.path.insert(0, str(DOCS.parent))


def _read_version():
    init = (DOCS.parent / 'foliapyn' / '__init__.py').read_text(encoding='utf-8')
    return re.search(r'__version__ = \'(.*?)\'', init).group(1)


project = 'foliapyn'
copyright = '2026, foliapyn developers'
release = _read_version()
version = '.'.join(release.split('.')[:2])

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.intersphinx', 'sphinx.ext.mathjax']

# Cochains, operators and reports link to the array libraries they wrap
intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'numpy': ('https://numpy.org/doc/stable', None),
    'scipy': ('https://docs.scipy.org/doc/scipy', None),
    'pandas': ('https://pandas.pydata.org/docs', None),
}

autodoc_member_order = 'bysource'
autodoc_default_options = {'members': True, 'undoc-members': False}

master_doc = 'index'
source_suffix = '.rst'
exclude_patterns = ['_build']

html_show_sourcelink = False
html_title = 'foliapyn {}'.format(release)
