import os.path as osp
from setuptools import setup, find_packages


cdir = osp.abspath(osp.dirname(__file__))
README = open(osp.join(cdir, 'README.rst')).read()
CHANGELOG = open(osp.join(cdir, 'changelog.rst')).read()

version = {}
with open(osp.join(cdir, 'kelly_stop', 'version.py')) as version_fp:
    exec(version_fp.read(), version)

setup(
    name="KellyStop",
    description="Kelly growth optimal strategies under a periodically reset stop-loss rule.",
    long_description='\n\n'.join((README, CHANGELOG)),
    author="Level 12 Developers",
    author_email="devteam@level12.io",
    url='https://github.com/level12/kelly-stop',
    classifiers=[
        'Intended Audience :: Financial and Insurance Industry',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: BSD License',
        'Operating System :: OS Independent',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
    ],
    license='BSD',
    package_data={'kelly_stop': ['py.typed']},
    packages=find_packages(),
    zip_safe=False,
    version=version['VERSION'],
    install_requires=[
        'arrow',
        'BlazeUtils',
        'click',
        'humanize',
        'numpy',
        'pandas>=1.5',
        'scipy>=1.6',
        'wrapt',
    ],
    extras_require={
        'test': [
            'flake8',
            'hypothesis',
            'pytest',
            'pytest-coverage',
            'tox',
        ],
        'docs': [
            'sphinx',
        ],
    },
    entry_points={
        'console_scripts': [
            'kellystop = kelly_stop.cli:kellystop',
        ],
    },
)
