"""
Entry point.

References
----------
https://chriswarrick.com/blog/2014/09/15/python-apps-the-right-way-entry_points-and-scripts/

Notes
-----
Use a TOML config file to set parameters; command line flags override it.
"""

import os
import sys
import argparse
from pysga.analysis.pysga_main import pysga
from pysga.analysis.utilities import (SgaError, ConfigError, CorpusError,
                                      TrackingError, CompatibilityError,
                                      NumericalError)
from pysga import __version__


# Get path of this file:
strDir = os.path.dirname(os.path.abspath(__file__))

# Exit codes:
varExtOk = 0
varExtIo = 1
varExtCnfg = 2
varExtCmpt = 3
varExtNum = 4

# Solver names accepted on the command line:
dicSolverAlias = {'euler': 'euler',
                  'ab4': 'adams_bashforth4',
                  'adams_bashforth4': 'adams_bashforth4',
                  'euler_maruyama': 'euler_maruyama_ito',
                  'euler_maruyama_ito': 'euler_maruyama_ito',
                  'reversible_heun': 'reversible_heun_stratonovich',
                  'reversible_heun_stratonovich':
                      'reversible_heun_stratonovich'}

# Graph building strategies accepted on the command line:
dicStrategy = {'with': ['with_constraint'],
               'with_constraint': ['with_constraint'],
               'no': ['no_constraint'],
               'no_constraint': ['no_constraint'],
               'both': ['with_constraint', 'no_constraint']}


def _name(strVal):
    """Normalise hyphenated names (`scenesayer-sde` -> `scenesayer_sde`)."""
    return strVal.strip().lower().replace('-', '_')


def _solver(strVal):
    strKey = _name(strVal)
    if strKey not in dicSolverAlias:
        raise argparse.ArgumentTypeError('unknown solver ' + repr(strVal))
    return dicSolverAlias[strKey]


def _strategy(strVal):
    strKey = _name(strVal)
    if strKey not in dicStrategy:
        raise argparse.ArgumentTypeError('unknown strategy ' + repr(strVal))
    return dicStrategy[strKey]


def _list_of(typVal):
    """Parser of comma separated lists (`10,20,50`)."""
    def funcPrs(strVal):
        try:
            return [typVal(strTmp) for strTmp in strVal.split(',')
                    if strTmp.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError('invalid list ' + repr(strVal))
    return funcPrs


def build_parser():
    """Command line parser with the commands synth, train, eval, ablate."""
    objParser = argparse.ArgumentParser(
        prog='pysga',
        description='Scene graph anticipation with learned differential '
                    + 'equations.')
    objSub = objParser.add_subparsers(dest='command', metavar='command')
    objSub.required = True

    dicCmd = {}
    for strCmd, strHlp in [
            ('synth', 'Generate a synthetic corpus.'),
            ('train', 'Train a model.'),
            ('eval', 'Evaluate a checkpoint.'),
            ('ablate', 'Compare several checkpoints.')]:
        objCmd = objSub.add_parser(strCmd, help=strHlp)
        # Add argument to namespace - config file path:
        objCmd.add_argument('-config', '--config', metavar='config.toml',
                            help='File path of config file with parameters.')
        objCmd.add_argument('--out', dest='strPathOut',
                            help='Output directory.')
        objCmd.add_argument('--seed', dest='varSeed', type=int,
                            help='Seed (fallback: environment variable '
                                 + 'SGA_SEED).')
        objCmd.add_argument('--corpus', dest='strPathCorpus',
                            help='Corpus file (annotation JSON).')
        dicCmd[strCmd] = objCmd

    # Synthetic corpus:
    dicCmd['synth'].add_argument('--preset', dest='strSynthPreset',
                                 type=_name,
                                 help='persistent, cyclic, uniform, mixed.')
    dicCmd['synth'].add_argument('--videos', dest='varSynthVideos', type=int,
                                 help='Number of videos.')

    # Model and training:
    for strCmd in ['train', 'eval']:
        dicCmd[strCmd].add_argument(
            '--model', dest='strModel', type=_name,
            help='scenesayer-ode, scenesayer-sde, baseline-plus, '
                 + 'baseline-plus-plus (eval also: persistence).')
    dicCmd['train'].add_argument('--solver', dest='strSolver', type=_solver,
                                 help='euler, adams-bashforth4, '
                                      + 'euler-maruyama, reversible-heun.')
    dicCmd['train'].add_argument('--h', dest='varStepSize', type=float,
                                 help='Solver step size (fraction of a '
                                      + 'frame).')
    dicCmd['train'].add_argument('--epochs', dest='varEpochs', type=int,
                                 help='Number of epochs.')
    dicCmd['train'].add_argument('--horizon', dest='varTrnHrz', type=int,
                                 help='Training anticipation horizon.')
    dicCmd['train'].add_argument('--resume', dest='lgcResume',
                                 action='store_true', default=None,
                                 help='Resume from the checkpoint in the '
                                      + 'output directory.')

    # Evaluation:
    dicCmd['eval'].add_argument('--checkpoint', dest='strPathCkpt',
                                help='Checkpoint file.')
    dicCmd['ablate'].add_argument('--checkpoint', dest='lstPathCkpt',
                                  action='append',
                                  help='Checkpoint file (repeat for every '
                                       + 'model).')
    for strCmd in ['eval', 'ablate']:
        objCmd = dicCmd[strCmd]
        objCmd.add_argument('--context-fraction', dest='lstCtxFrc',
                            type=_list_of(float),
                            help='Context fractions, e.g. 0.3,0.5.')
        objCmd.add_argument('--future-frame', dest='lstFutFrm',
                            type=_list_of(int),
                            help='Future frames, e.g. 1,3.')
        objCmd.add_argument('--k', dest='lstK', type=_list_of(int),
                            help='Values of K, e.g. 10,20,50.')
        objCmd.add_argument('--strategy', dest='lstStrategy',
                            type=_strategy,
                            help='with, no, or both.')
        objCmd.add_argument('--brownian-seed', dest='varBrwnSeed', type=int,
                            help='Brownian seed of SDE evaluation.')
        objCmd.add_argument('--samples', dest='varNumSmp', type=int,
                            help='Number of SDE samples per prediction.')
        objCmd.add_argument('--par', dest='varPar', type=int,
                            help='Number of parallel processes.')

    return objParser


def overrides(objNspc):
    """
    Config parameters given on the command line.

    Selecting a regime on the command line (context fraction or future frame)
    disables the other regime unless it is given too.
    """
    dicOvr = {strKey: objVal for strKey, objVal in vars(objNspc).items()
              if strKey not in ('command', 'config') and objVal is not None}
    if 'lstCtxFrc' in dicOvr and 'lstFutFrm' not in dicOvr:
        dicOvr['lstFutFrm'] = []
    if 'lstFutFrm' in dicOvr and 'lstCtxFrc' not in dicOvr:
        dicOvr['lstCtxFrc'] = []
    return dicOvr


def main(lstArgs=None):
    """pysga entry point; returns the exit code."""
    strWelcome = 'pysga ' + __version__
    strDec = '=' * len(strWelcome)
    print(strDec + '\n' + strWelcome + '\n' + strDec)

    # Namespace object containing arguments and values:
    objNspc = build_parser().parse_args(lstArgs)

    try:
        pysga(objNspc.command, objNspc.config, dicOvr=overrides(objNspc))
    except CompatibilityError as objExc:
        print('Compatibility error: ' + str(objExc), file=sys.stderr)
        return varExtCmpt
    except NumericalError as objExc:
        print('Numerical error: ' + str(objExc), file=sys.stderr)
        return varExtNum
    except ConfigError as objExc:
        print('Config error: ' + str(objExc), file=sys.stderr)
        return varExtCnfg
    except (CorpusError, TrackingError, OSError) as objExc:
        print('Input/output error: ' + str(objExc), file=sys.stderr)
        return varExtIo
    except SgaError as objExc:
        print('Error: ' + str(objExc), file=sys.stderr)
        return varExtCnfg
    return varExtOk


if __name__ == "__main__":
    sys.exit(main())
