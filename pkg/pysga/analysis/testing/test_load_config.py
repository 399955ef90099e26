"""Test config loading, precedence and validation."""

import os
import sys
import pytest
import tomli_w

from pysga.analysis import load_config as lc
from pysga.analysis.heads_losses import dicDefLmb
from pysga.analysis.utilities import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@pytest.fixture(autouse=True)
def no_seed_variable(monkeypatch):
    monkeypatch.delenv(lc.strEnvSeed, raising=False)


def _write(tmp_path, dicCfg):
    strPath = str(tmp_path / 'config.toml')
    with open(strPath, 'wb') as fleCfg:
        tomli_w.dump(dicCfg, fleCfg)
    return strPath


def test_default_file_matches_defaults():
    """The shipped example config states the built-in defaults."""
    strPath = os.path.join(lc.strDir, 'config_default.toml')
    assert lc.load_config(strPath, lgcPrint=False) == \
        lc.load_config(lgcPrint=False)


def test_every_parameter_present():
    dicCnfg = lc.load_config(lgcPrint=False)
    assert sorted(dicCnfg) == sorted(tplPrm[0] for tplPrm in lc.lstParams)
    assert list(dicCnfg) == sorted(dicCnfg)


@pytest.mark.parametrize('strModel, strSolver', [
    ('scenesayer_ode', 'adams_bashforth4'),
    ('scenesayer_sde', 'reversible_heun_stratonovich'),
    ('baseline_plus', 'euler'),
    ('baseline_plus_plus', 'euler')])
def test_model_defaults(strModel, strSolver):
    dicCnfg = lc.load_config(dicOvr={'strModel': strModel}, lgcPrint=False)
    assert dicCnfg['strSolver'] == strSolver
    assert dicCnfg['lstLambda'] == dicDefLmb[strModel]


def test_precedence(tmp_path, monkeypatch):
    """Command line > file > environment > defaults."""
    strPath = _write(tmp_path, {'varSeed': 5, 'varEpochs': 3})
    monkeypatch.setenv(lc.strEnvSeed, '9')

    dicCnfg = lc.load_config(strPath, dicOvr={'varEpochs': 4},
                             lgcPrint=False)
    assert dicCnfg['varSeed'] == 5
    assert dicCnfg['varBrwnSeed'] == 9
    assert dicCnfg['varEpochs'] == 4

    dicCnfg = lc.load_config(dicOvr={'varSeed': 1}, lgcPrint=False)
    assert dicCnfg['varSeed'] == 1
    assert dicCnfg['varBrwnSeed'] == 9

    monkeypatch.delenv(lc.strEnvSeed)
    assert lc.load_config(lgcPrint=False)['varSeed'] == 7


def test_overrides_none_ignored():
    dicCnfg = lc.load_config(dicOvr={'varEpochs': None}, lgcPrint=False)
    assert dicCnfg['varEpochs'] == 20


def test_conversions(tmp_path):
    strPath = _write(tmp_path, {'varEpochs': 3.0, 'lgcResume': 'True',
                                'lstK': '5, 15', 'lstCtxFrc': [1, 0.5]})
    dicCnfg = lc.load_config(strPath, lgcPrint=False)
    assert dicCnfg['varEpochs'] == 3
    assert isinstance(dicCnfg['varEpochs'], int)
    assert dicCnfg['lgcResume'] is True
    assert dicCnfg['lstK'] == [5, 15]
    assert dicCnfg['lstCtxFrc'] == [1.0, 0.5]


@pytest.mark.parametrize('strKey, objVal', [
    ('varEpochs', 2.5),
    ('varEpochs', True),
    ('lgcResume', 'yes'),
    ('lgcResume', 1),
    ('varLr', 'fast'),
    ('lstK', ['ten'])])
def test_invalid_types(strKey, objVal):
    with pytest.raises(ConfigError, match=strKey):
        lc.load_config(dicOvr={strKey: objVal}, lgcPrint=False)


@pytest.mark.parametrize('dicOvr, strKey', [
    ({'varNumHead': 3}, 'varNumHead'),
    ({'strModel': 'scenesayer_ode', 'strSolver': 'euler_maruyama_ito'},
     'strSolver'),
    ({'strModel': 'scenesayer_sde', 'strSolver': 'euler'}, 'strSolver'),
    ({'strSolver': 'midpoint'}, 'strSolver'),
    ({'varStepSize': 0.3}, 'varStepSize'),
    ({'strModel': 'scenesayer_ode', 'varStepSize': 1.0}, 'varStepSize'),
    ({'lstLambda': [1.0, -1.0, 1.0, 1.0, 1.0]}, 'lstLambda'),
    ({'strLossAblate': 'all'}, 'strLossAblate'),
    ({'varTrnHrz': 4}, 'varTrnHrz'),
    ({'lstCtxFrc': [0.0]}, 'lstCtxFrc'),
    ({'lstFutFrm': [0]}, 'lstFutFrm'),
    ({'lstK': []}, 'lstK'),
    ({'lstStrategy': ['top1']}, 'lstStrategy'),
    ({'varFrmMin': 2}, 'varFrmMin'),
    ({'varPairMax': 8}, 'varPairMax'),
    ({'varPar': 0}, 'varPar'),
    ({'varLr': 0.0}, 'varLr')])
def test_invalid_values(dicOvr, strKey):
    """Validation names the offending parameter."""
    with pytest.raises(ConfigError, match='Parameter ' + strKey):
        lc.load_config(dicOvr=dicOvr, lgcPrint=False)


def test_unknown_parameter(tmp_path):
    with pytest.raises(ConfigError, match='varUnknown'):
        lc.load_config(_write(tmp_path, {'varUnknown': 1}), lgcPrint=False)


def test_invalid_toml(tmp_path):
    strPath = str(tmp_path / 'config.toml')
    with open(strPath, 'w') as fleCfg:
        fleCfg.write('varEpochs = = 3\n')
    with pytest.raises(ConfigError, match='Cannot parse'):
        lc.load_config(strPath, lgcPrint=False)


def test_printed_parameters(capsys):
    lc.load_config(dicOvr={'varEpochs': 6})
    assert '---Number of epochs: 6' in capsys.readouterr().out


def test_resolved_config(tmp_path):
    """The resolved config file loads back to the same parameters."""
    dicCnfg = lc.load_config(dicOvr={'strModel': 'baseline_plus'},
                             lgcPrint=False)
    strPath = lc.write_resolved_config(dicCnfg, str(tmp_path / 'out'))
    assert os.path.basename(strPath) == lc.strFleRes
    with open(strPath, 'rb') as fleRes:
        assert tomllib.load(fleRes) == dicCnfg
    assert lc.load_config(strPath, lgcPrint=False) == dicCnfg
