import types

import pytest

from kelly_stop import checks


class TestRegistry:
    def test_names(self):
        names = checks.names()
        assert 'alpha-pde/terminal-stop' in names
        assert 'legendre/identities' in names
        assert 'monte-carlo/kelly-growth' in names
        assert len(names) == len(set(names))

    def test_unknown_name(self):
        result = checks.run_check('no-such-check')
        assert not result.passed
        assert result.detail == "KeyError: 'no-such-check'"

    def test_raising_check(self, monkeypatch):
        def boom():
            raise ZeroDivisionError('division by zero')

        monkeypatch.setitem(checks._registry, 'boom', boom)
        result = checks.run_check('boom')
        assert result == checks.CheckResult('boom', False, 'ZeroDivisionError: division by zero')

    def test_failing_check(self, monkeypatch):
        monkeypatch.setitem(checks._registry, 'never', lambda: (False, 'always fails'))
        results = checks.run_all(['never', 'var-cap'])
        assert [r.passed for r in results] == [False, True]
        assert results[0].detail == 'always fails'


class TestChecks:
    @pytest.mark.parametrize('name', [n for n in checks.names() if not n.startswith('monte')])
    def test_passes(self, name):
        result = checks.run_check(name)
        assert result.passed, result.detail

    @pytest.mark.slow
    def test_monte_carlo(self):
        result = checks.run_check('monte-carlo/kelly-growth')
        assert result.passed, result.detail

    @pytest.mark.parametrize('growth,passed', [(1.025, True), (0.975, True), (1.035, False)])
    def test_monte_carlo_tolerance(self, monkeypatch, growth, passed):
        fake = types.SimpleNamespace(mean_log_growth=growth, std_error=0.01)
        monkeypatch.setattr(checks, 'simulate', lambda cfg, dp, strategy: fake)
        result = checks.run_check('monte-carlo/kelly-growth')
        assert result.passed is passed
        assert result.detail == 'growth {:.4f} +/- 0.0100'.format(growth)

    def test_order_check(self):
        passed, detail = checks._order_check(lambda h: h * h)
        assert passed
        assert detail.endswith('order 2.000')
        passed, _ = checks._order_check(lambda h: h)
        assert not passed
        passed, detail = checks._order_check(lambda h: 0.0)
        assert passed
        assert detail.startswith('exact')
