"""Helpers for testing the command line."""
import shlex

import click.testing


def _runner() -> click.testing.CliRunner:
    try:
        return click.testing.CliRunner(mix_stderr=False)
    except TypeError:
        # click 8.2 always keeps stderr apart
        return click.testing.CliRunner()


def invoke_command(cli, *args, exit_code=0, input=None, env=None):
    runner = _runner()
    result = runner.invoke(cli, args, input=input, env=env, catch_exceptions=exit_code != 0)
    assert result.exit_code == exit_code, 'Exit code {} != {}\nstdout:\n{}\nstderr:\n{}'.format(
        result.exit_code, exit_code, result.stdout, result.stderr)
    return result


class CLIBase(object):
    """Subclass and set ``cmd_name`` to the sub-command (plus any leading options) under test."""
    cmd_name = None

    @classmethod
    def cli(cls):
        from kelly_stop.cli import kellystop
        return kellystop

    def invoke(self, *args, exit_code=0, input=None, env=None):
        prefix = shlex.split(self.cmd_name) if self.cmd_name else []
        return invoke_command(self.cli(), *prefix, *[str(a) for a in args], exit_code=exit_code,
                              input=input, env=env)
