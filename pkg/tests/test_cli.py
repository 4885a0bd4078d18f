import csv
import io
import os

import pytest

import cli
from cli import EXIT_NOT_CONVERGED, EXIT_OK, EXIT_USAGE, main, parse_config, read_config_text
from errors import ConfigError
from lifshitz import perfect_conductor_free_energy

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


class TestConfigText:
    def test_keys_are_case_insensitive(self):
        values = read_config_text("material = 'gold-drude'\nD_Min = 20\n")
        assert values == {'MATERIAL': 'gold-drude', 'D_MIN': 20}

    def test_comments_and_docstrings(self):
        values = read_config_text('"""run file"""\n# comment\nPOINTS = 5  # trailing\n')
        assert values == {'POINTS': 5}

    def test_unknown_key_lists_valid_keys(self):
        with pytest.raises(ConfigError) as info:
            read_config_text("POINTS = 5\nSPHERE_RADIUS = 3\n")
        message = str(info.value)
        assert 'line 2' in message
        assert 'SPHERE_RADIUS' in message
        assert 'RADIUS' in message and 'TEMPERATURE' in message

    @pytest.mark.parametrize('text', ["POINTS = 'many'\n", "USE_CACHE = 1\n", "D_MIN = True\n"])
    def test_wrong_types(self, text):
        with pytest.raises(ConfigError) as info:
            read_config_text(text)
        assert 'line 1' in str(info.value)

    def test_expressions_are_not_executed(self):
        with pytest.raises(ConfigError):
            read_config_text("D_MIN = __import__('os').getcwd()\n")

    def test_syntax_error(self):
        with pytest.raises(ConfigError) as info:
            read_config_text("POINTS = \n")
        assert 'line 1' in str(info.value)

    def test_shipped_example_parses(self):
        config = parse_config('theta1', os.path.join(ROOT, 'config.example.py'))
        assert config.sphere_material == config.plate_material == 'gold-drude'
        assert config.temperature == 300.0
        assert config.points == 40


class TestParseConfig:
    def test_flags_override_file(self, tmp_path):
        path = tmp_path / 'run.py'
        path.write_text("MATERIAL = 'gold-drude'\nD_MIN = 20\nTEMPERATURE = 'zero'\n", encoding='utf-8')
        config = parse_config('pp', str(path), {'D_MIN': 50.0, 'MATERIAL': 'perfect-conductor'})
        assert config.d_min == 50.0
        assert config.temperature == 'zero'
        assert config.sphere_material == config.plate_material == 'perfect-conductor'

    def test_material_flag_replaces_split_file_materials(self, tmp_path):
        path = tmp_path / 'run.py'
        path.write_text("SPHERE_MATERIAL = 'gold-drude'\nPLATE_MATERIAL = 'constant:5'\n", encoding='utf-8')
        config = parse_config('pp', str(path), {'MATERIAL': 'perfect-conductor'})
        assert config.plate_material == 'perfect-conductor'

    def test_conflicting_material_keys(self):
        with pytest.raises(ConfigError) as info:
            parse_config('pp', None, {'MATERIAL': 'gold-drude', 'PLATE_MATERIAL': 'vacuum'})
        assert 'conflicting' in str(info.value)

    def test_temperature_keyword(self):
        assert parse_config('pp', None, {'TEMPERATURE': 'ZERO'}).temperature == 'zero'
        with pytest.raises(ConfigError):
            parse_config('pp', None, {'TEMPERATURE': 'warm'})

    def test_higher_coefficients(self, tmp_path):
        path = tmp_path / 'run.py'
        path.write_text("GEOMETRY = 'custom'\nC1 = 0.25\nHIGHER_COEFFICIENTS = [0.125, 0.078125]\n", encoding='utf-8')
        assert parse_config('theta1', str(path)).higher_coefficients == (0.125, 0.078125)
        assert parse_config('theta1', str(path), {'HIGHER_COEFFICIENTS': [0.5]}).higher_coefficients == (0.5,)
        with pytest.raises(ConfigError):
            parse_config('theta1', None, {'GEOMETRY': 'custom', 'C1': 0.0, 'HIGHER_COEFFICIENTS': ['big']})

    def test_higher_coefficients_flag(self):
        args = cli.build_parser().parse_args(['profile', '--geometry', 'custom', '--c1', '0.25',
                                              '--higher-coefficients', '0.125', '0.078125'])
        assert cli._overrides(args)['HIGHER_COEFFICIENTS'] == [0.125, 0.078125]

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config('pp', str(tmp_path / 'absent.py'))

    def test_validation_errors_surface(self):
        with pytest.raises(ConfigError):
            parse_config('theta1', None, {'D_MIN': -5.0})


class TestMain:
    def test_pp_run_writes_csv(self, tmp_path):
        output = tmp_path / 'pp.csv'
        code = main(['pp', '--material', 'perfect-conductor', '--temperature', 'zero', '--d-min', '100',
                     '--points', '1', '--no-cache', '--output', str(output)])
        assert code == EXIT_OK
        rows = list(csv.DictReader(io.StringIO(output.read_text(encoding='utf-8'))))
        assert len(rows) == 1
        assert float(rows[0]['free_energy_pp']) == pytest.approx(perfect_conductor_free_energy(100.0), rel=1e-6)
        assert rows[0]['converged'] == 'true'

    def test_stdout_jsonl(self, tmp_path, capsys):
        code = main(['pp', '--material', 'perfect-conductor', '--temperature', 'zero', '--d-min', '100',
                     '--points', '1', '--format', 'jsonl', '--cache-dir', str(tmp_path)])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert out.count('\n') == 1 and '"free_energy_pp"' in out

    def test_usage_errors(self, capsys):
        assert main(['pp', '--d-min', '-1', '--no-cache']) == EXIT_USAGE
        assert 'configuration error' in capsys.readouterr().err
        assert main(['pp', '--temperature', 'hot', '--no-cache']) == EXIT_USAGE

    def test_failed_rows_exit_non_zero(self, tmp_path):
        code = main(['theta1', '--material', 'vacuum', '--temperature', 'zero', '--d-min', '100',
                     '--points', '1', '--no-cache', '--output', str(tmp_path / 'out.csv')])
        assert code == EXIT_NOT_CONVERGED

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as info:
            main(['sphere'])
        assert info.value.code == 2

    def test_validate_reports(self, monkeypatch, capsys):
        report = {'valid': False, 'errors': ['x: off'], 'warnings': [],
                  'checks': [{'name': 'x', 'value': 1.0, 'expected': 0.0, 'passed': False}]}
        monkeypatch.setattr('oracles.validate', lambda full: report)
        assert main(['validate']) == EXIT_NOT_CONVERGED
        captured = capsys.readouterr()
        assert 'FAIL x' in captured.out
        assert 'x: off' in captured.err


@pytest.mark.slow
def test_theta1_sweep_perfect_conductor(tmp_path):
    output = tmp_path / 'theta.csv'
    code = cli.main(['theta1', '--material', 'perfect-conductor', '--temperature', 'zero', '--d-min', '100',
                     '--points', '1', '--no-cache', '--output', str(output)])
    rows = list(csv.DictReader(io.StringIO(output.read_text(encoding='utf-8'))))
    assert float(rows[0]['theta1']) == pytest.approx(-0.564, abs=1e-3)
    assert code in (EXIT_OK, EXIT_NOT_CONVERGED)
