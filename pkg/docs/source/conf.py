# Sphinx configuration for the Kelly-Stop documentation.
# https://www.sphinx-doc.org/en/master/usage/configuration.html
import configparser
import datetime as dt

import kelly_stop


project = 'Kelly-Stop'
copyright = u"{year} Level 12".format(year=dt.datetime.utcnow().year)

cfg = configparser.ConfigParser()
cfg.read('../../setup.cfg')
tag = cfg.get('egg_info', 'tag_build')

html_context = {
    'prerelease': bool(tag),
}
release = kelly_stop.__version__ + tag


extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.intersphinx',
    'sphinx.ext.mathjax',
    'sphinx.ext.viewcode',
]

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'numpy': ('https://numpy.org/doc/stable', None),
    'scipy': ('https://docs.scipy.org/doc/scipy', None),
    'pandas': ('https://pandas.pydata.org/docs', None),
}

# Source order: types before operations.
autodoc_member_order = 'bysource'
autodoc_typehints = 'description'

exclude_patterns = []
master_doc = 'index'


html_theme = 'alabaster'
html_theme_options = {
    'description': 'Kelly growth under a periodically reset stop-loss',
    'github_user': 'level12',
    'github_repo': 'kelly-stop',
    'github_banner': False,
    'github_button': True,
    'codecov_button': True,
    'extra_nav_links': {
        'Level 12': 'https://www.level12.io',
        'File an Issue': 'https://github.com/level12/kelly-stop/issues/new',
    },
    'show_powered_by': True,
}
