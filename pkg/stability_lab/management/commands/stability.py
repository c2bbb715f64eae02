# stability_lab/management/commands/stability.py
import sys
import json
import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand

from stability_lab.exceptions import (
    StabilityLabError, ConfigError, UnknownSystem, ParameterError, GridTooCoarse,
    NonFiniteInput, QuadratureError, UnsupportedSpaceKind
)
from stability_lab.exporters import render_json
from stability_lab.models import GAIN_NAMES, QuadratureRule, SystemId
from stability_lab.runner import COMMANDS, run_command
from stability_lab.serializers import RunConfigSerializer, INITIAL_STATES
from stability_lab.systems import SystemCatalog

logger = logging.getLogger(__name__)

# Raised for a bad configuration rather than a failed computation
INPUT_ERRORS = (ConfigError, UnknownSystem, ParameterError, GridTooCoarse,
                NonFiniteInput, QuadratureError, UnsupportedSpaceKind)

EXIT_FAILED = 1
EXIT_CONFIG = 2


def default_config() -> dict:
    """RunConfig fields from settings.STABILITY_LAB"""
    defaults = settings.STABILITY_LAB
    return {
        'system': defaults['SYSTEM'],
        'params': {},
        'n': defaults['N'],
        't_end': defaults['T_END'],
        'dt': defaults['DT'],
        'quad': {
            'rule': defaults['QUADRATURE_RULE'],
            'panels': defaults['QUADRATURE_PANELS'],
            'nodes': defaults['QUADRATURE_NODES'],
        },
        'gamma_fraction': defaults['GAMMA_FRACTION'],
        'output_dir': str(defaults['OUTPUT_DIR']),
        'seed': defaults['SEED'],
        'initial_state': defaults['INITIAL_STATE'],
        'horizons': list(defaults['ADMISSIBILITY_HORIZONS']),
        'admissibility_steps': defaults['ADMISSIBILITY_STEPS'],
        'ladder': list(defaults['SWEEP_LADDER']),
        'decay_t_max': defaults['DECAY_T_MAX'],
        'decay_t_points': defaults['DECAY_T_POINTS'],
        'verify_samples': defaults['VERIFY_SAMPLES'],
        'tolerances': dict(defaults['VERIFY_TOLERANCES']),
        'export_matrices': False,
    }


def load_config_file(path: str) -> dict:
    try:
        document = json.loads(Path(path).read_text(encoding='utf-8'))
    except FileNotFoundError:
        raise ConfigError(f"Config file {path} does not exist", {'config': path})
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e.msg}", {'config': path, 'line': e.lineno})
    if not isinstance(document, dict):
        raise ConfigError("Config file must hold a single JSON object", {'config': path})
    return document


def merge_config(base: dict, override: dict) -> dict:
    """Overlay one config layer; nested params, quad and tolerances merge key by key"""
    unknown = sorted(set(override) - set(base))
    if unknown:
        raise ConfigError(f"Unknown config keys: {', '.join(unknown)}", {'unknown': unknown})

    merged = dict(base)
    for key, value in override.items():
        if key in ('params', 'quad', 'tolerances') and isinstance(value, dict):
            merged[key] = {**base[key], **value}
        else:
            merged[key] = value
    return merged


def fill_default_gains(config: dict, gain: float) -> dict:
    """Set every gain the chosen system requires but the run left unset"""
    try:
        system = SystemId.parse(config['system'])
    except UnknownSystem:
        return config
    params = dict(config['params'])
    for name in SystemCatalog.ENTRIES[system].required:
        if params.get(name) is None:
            params[name] = gain
    return {**config, 'params': params}


class Command(BaseCommand):
    help = (
        "Coupled beam/wave stability lab: simulate, spectrum, decay certificates, "
        "admissibility estimates, property verification and resolution sweeps"
    )

    def add_arguments(self, parser):
        defaults = settings.STABILITY_LAB
        parser.add_argument('action', choices=COMMANDS, help='Command to run')
        parser.add_argument(
            '--system', type=str,
            help=f"Catalog system ({', '.join(s.value for s in SystemId)}); default {defaults['SYSTEM']}",
        )
        for name in GAIN_NAMES:
            parser.add_argument(
                f'--{name}', type=float,
                help=f"Gain {name}; required gains default to {defaults['DEFAULT_GAIN']}",
            )
        parser.add_argument('--n', type=int, help=f"Grid resolution (>= 4); default {defaults['N']}")
        parser.add_argument('--t-end', type=float, help=f"Simulation horizon; default {defaults['T_END']}")
        parser.add_argument('--dt', type=float, help=f"Snapshot spacing; default {defaults['DT']}")
        parser.add_argument(
            '--rule', choices=[rule.value for rule in QuadratureRule],
            help=f"Convolution quadrature; default {defaults['QUADRATURE_RULE']}",
        )
        parser.add_argument('--panels', type=int, help=f"Quadrature panels; default {defaults['QUADRATURE_PANELS']}")
        parser.add_argument(
            '--gamma-fraction', type=float,
            help=f"Certified rate as a fraction of the slower block rate; default {defaults['GAMMA_FRACTION']}",
        )
        parser.add_argument('--out', type=str, help=f"Output directory; default {defaults['OUTPUT_DIR']}")
        parser.add_argument('--seed', type=int, help=f"Seed of random test states; default {defaults['SEED']}")
        parser.add_argument(
            '--initial-state', choices=INITIAL_STATES,
            help=f"Initial state of simulate; default {defaults['INITIAL_STATE']}",
        )
        parser.add_argument(
            '--ladder', type=str,
            help=f"Comma-separated sweep resolutions; default {','.join(map(str, defaults['SWEEP_LADDER']))}",
        )
        parser.add_argument(
            '--export-matrices', action='store_true',
            help='spectrum: also write generator, Gram and coupling matrices',
        )
        parser.add_argument('--config', type=str, help='JSON config file; flags override its values')

    def flag_overrides(self, options) -> dict:
        overrides = {}
        simple = {
            'system': 'system', 'n': 'n', 't_end': 't_end', 'dt': 'dt',
            'gamma_fraction': 'gamma_fraction', 'out': 'output_dir', 'seed': 'seed',
            'initial_state': 'initial_state',
        }
        for option, key in simple.items():
            if options.get(option) is not None:
                overrides[key] = options[option]

        params = {name: options[name] for name in GAIN_NAMES if options.get(name) is not None}
        if params:
            overrides['params'] = params

        quad = {}
        if options.get('rule') is not None:
            quad['rule'] = options['rule']
        if options.get('panels') is not None:
            quad['panels'] = options['panels']
        if quad:
            overrides['quad'] = quad

        if options.get('ladder'):
            try:
                overrides['ladder'] = [int(value) for value in options['ladder'].split(',') if value.strip()]
            except ValueError:
                raise ConfigError(f"--ladder must list integers, got {options['ladder']}", {'ladder': options['ladder']})
        if options.get('export_matrices'):
            overrides['export_matrices'] = True
        return overrides

    def resolve_config(self, options):
        config = default_config()
        if options.get('config'):
            config = merge_config(config, load_config_file(options['config']))
        config = merge_config(config, self.flag_overrides(options))
        config = fill_default_gains(config, settings.STABILITY_LAB['DEFAULT_GAIN'])

        serializer = RunConfigSerializer(data=config)
        if not serializer.is_valid():
            raise ConfigError("Invalid run configuration", {'errors': serializer.errors})
        return serializer.save()

    def fail(self, error: StabilityLabError, status: int):
        logger.error(f"{error.code}: {error.message}")
        self.stderr.write(render_json(error.as_dict()).decode('utf-8'), ending='')
        sys.exit(status)

    def handle(self, *args, **options):
        action = options['action']
        try:
            config = self.resolve_config(options)
            status, summary = run_command(action, config)
        except INPUT_ERRORS as e:
            self.fail(e, EXIT_CONFIG)
        except StabilityLabError as e:
            self.fail(e, EXIT_FAILED)

        if action == 'list-systems':
            for entry in summary['systems']:
                self.stdout.write(f"{entry['system']:<14} {','.join(entry['required_params']):<12} {entry['description']}")
        else:
            outcome = 'ok' if status == 0 else 'failed'
            self.stdout.write(f"{action} {config.system.value} n={config.n}: {outcome} -> {config.output_dir}")

        if status != 0:
            sys.exit(status)
