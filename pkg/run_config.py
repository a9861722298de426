import copy
import glob
import json
import os
import sys

import yaml

import integrate
import mesh as msh
import scenario
import solver_base as sb

# Exception classes for run descriptions. Both map to exit code 2 on the command line.
class ParseError(Exception):
    pass

class ValidationError(Exception):
    def __init__(self, errors):
        super().__init__("\n".join(errors))
        self.errors = errors

SOLVERS = ("vme", "dns", "both")

def get_class(classpath):
    '''Take a string of the form module.name and return the actual object (class or function).'''
    modulename, classname = "?", "?"
    try:
        modulename, classname = classpath.split('.')
        module = __import__(modulename)
        return getattr(module, classname)
    except Exception as err:
        raise ValidationError([f'ERROR: Unable to load {classname} in module: {modulename}. Underlying error = {err}']) from err

def str_to_bool(value):
    if isinstance(value, bool):
        return value
    if str(value).lower() in {'false', 'f', '0', 'no', 'n'}:
        return False
    elif str(value).lower() in {'true', 't', '1', 'yes', 'y'}:
        return True
    raise ValueError(f'{value} is not a valid boolean value')

#Helper function to merge config documents as they are.
def merge(source, destination, verbose=True):
    """
    Deep merge two dictionaries

    >>> a = { 'mesh' : { 'n_es' : 100, 'n_ef' : 8 } }
    >>> b = { 'mesh' : { 'n_ecp' : 2, 'n_ef' : 16 } }
    >>> merge(b, a) == { 'mesh' : { 'n_es' : 100, 'n_ecp' : 2, 'n_ef' : 16 } }
    True
    """
    for key, value in source.items():
        if isinstance(value, dict):
            node = destination.setdefault(key, {})
            merge(value, node, verbose)
        else:
            if (key in destination.keys()) and (destination[key] != value):
                if (verbose): print(f'INFORMATION: Overwriting configuration key \'{key}\'. Value: \'{destination[key]}\' => \'{value}\'', file=sys.stderr)
            destination[key] = value

    return destination

def parse_document(text, source="<text>"):
    '''Parse a YAML (or JSON) document into a dict, raising ParseError with the line and column of the fault.'''
    try:
        _doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        _mark = getattr(e, "problem_mark", None)
        _where = f' at line {_mark.line + 1}, column {_mark.column + 1}' if _mark is not None else ''
        raise ParseError(f'ERROR: {source}: invalid document{_where}: {getattr(e, "problem", e)}') from e
    if _doc is None: return {}
    if not isinstance(_doc, dict): raise ParseError(f'ERROR: {source}: top level must be a mapping of sections.')
    return _doc

class RunConfig():
    '''Merged run description: config/defaults.yml first, then user documents on top.'''
    def __init__(self, verbose=True):
        self._config = {}
        self._verbose = verbose

    @property
    def verbose(self):
        return self._verbose

    @property
    def config(self):
        return self._config

    def _section(self, name):
        _s = self._config.get(name, {})
        return _s if isinstance(_s, dict) else {}

    ### Loading ###

    def merge_config(self, config):
        self._config = merge(config, self._config, self._verbose)

    def load_text(self, text, source="<text>"):
        self.merge_config(parse_document(text, source))

    def load_configfile(self, filepath):
        '''Load a YAML or JSON config file and merge it.'''
        with open(filepath, "r") as stream:
            _text = stream.read()
        if os.path.splitext(filepath)[1] == ".json":
            try:
                self.merge_config(json.loads(_text))
            except json.JSONDecodeError as e:
                raise ParseError(f'ERROR: {filepath}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}') from e
        else:
            self.load_text(_text, filepath)

    def load_config_globlist(self, globlist):
        '''Load config files using a supplied globlist to find them. These can be yml or json files.'''
        n = 0
        for g in globlist:
            for file in sorted(glob.glob(sb.absolute_path(g))):
                if (self._verbose): print("Loading config file " + file + "...", file=sys.stderr)
                fname, fext = os.path.splitext(file)
                if fext in (".yml", ".yaml", ".json"):
                    self.load_configfile(file)
                    n += 1
                else:
                    print("WARNING: file: " + str(file) + " is being ignored. Config files must have extension .yml, .yaml. or .json.", file=sys.stderr)
        return n

    def load_defaults(self):
        _dir = os.path.join(sb.vme_home(), "config")
        return self.load_config_globlist([_dir + '/*.yml', _dir + '/*.yaml', _dir + '/*.json'])

    ### Properties ###

    @property
    def solver(self):
        return str(self._config.get("solver", "vme")).lower()

    @property
    def scaling(self):
        '''scenario.Scaling when a scaling section is given, otherwise None.'''
        _s = self._config.get("scaling", None)
        if not _s: return None
        return scenario.Scaling(float(_s.get("length", 1.0)), float(_s.get("modulus", 1.0)), float(_s.get("density", 1.0)))

    def _mesh_int(self, key):
        return int(self._section("mesh")[key])

    @property
    def n_es(self):
        return self._mesh_int("n_es")

    @property
    def n_ecp(self):
        return self._mesh_int("n_ecp")

    @property
    def n_ef(self):
        return self._mesh_int("n_ef")

    @property
    def n_el(self):
        return self._mesh_int("n_el")

    @property
    def boundary(self):
        return msh.BoundaryConditions.from_rule(self._section("boundary"))

    @property
    def microstructure(self):
        _m = self._section("material")
        return scenario.Microstructure(float(_m["contrast"]), float(_m["fraction"]))

    @property
    def pulse(self):
        _p = self._section("pulse")
        a, c = float(_p["a"]), float(_p["c"])
        if self.scaling is not None: a, c = self.scaling.length_to_nd(a), self.scaling.length_to_nd(c)
        return scenario.InitialPulse(a, c)

    @property
    def end_time(self):
        _t = float(self._section("output").get("end_time", 0.0))
        return self.scaling.time_to_nd(_t) if self.scaling is not None else _t

    @property
    def snapshot_times(self):
        _times = [float(t) for t in (self._section("output").get("snapshot_times") or [])]
        return tuple(self.scaling.time_to_nd(t) for t in _times) if self.scaling is not None else tuple(_times)

    @property
    def report_time(self):
        '''Time at which run_matrix reads the error column: output.report_time, else the last snapshot time, else the end time.'''
        _t = self._section("output").get("report_time", None)
        if _t is None: return self.snapshot_times[-1] if self.snapshot_times else self.end_time
        return self.scaling.time_to_nd(float(_t)) if self.scaling is not None else float(_t)

    @property
    def output_dir(self):
        return sb.absolute_path(str(self._section("output").get("directory", "vme-output")))

    @property
    def workers(self):
        return int(self._section("output").get("workers", 1))

    @property
    def scheme(self):
        return str(self._section("integrator").get("scheme", ""))

    @property
    def cfl(self):
        return float(self._section("integrator")["cfl"])

    @property
    def dns_scheme(self):
        return str(self._section("integrator").get("dns_scheme", "sub-step"))

    @property
    def dns_cfl(self):
        '''integrator.dns_cfl, else the multiscale cfl.'''
        _i = self._section("integrator")
        return float(_i.get("dns_cfl", _i["cfl"]))

    @property
    def dt_floor(self):
        return float(self._section("integrator").get("dt_floor", 1e-9))

    @property
    def denom_floor(self):
        return float(self._section("integrator").get("denom_floor", 1e-12))

    def integrator_config(self):
        _i = self._section("integrator")
        return integrate.IntegratorConfig(
            scheme=self.scheme, cfl=self.cfl, p=float(_i["p"]),
            tol_c=float(_i["tol_c"]), tol_f=float(_i["tol_f"]), tol_newton=float(_i["tol_newton"]),
            max_split_iters=int(_i["max_split_iters"]), max_newton_iters=int(_i["max_newton_iters"]),
            denom_floor=float(_i["denom_floor"]), dt_floor=float(_i["dt_floor"]),
            freeze_fine=str_to_bool(_i.get("freeze_fine", False)), coupling_mass=str_to_bool(_i.get("coupling_mass", True)),
            coarse_solve=str(_i.get("coarse_solve", "condensed")), workers=self.workers)

    def stepper(self):
        '''The step function registered for the configured scheme under schemes.<NAME>.stepper.'''
        return get_class(self._get_registry_entry("schemes", self.scheme))

    def dns_stepper(self):
        return get_class(self._get_registry_entry("dns-schemes", self.dns_scheme))

    def _get_registry_entry(self, section, name):
        _rule = self._section(section).get(name, None)
        if _rule is None or "stepper" not in _rule: raise ValidationError([f'ERROR: run_config({section}.{name}.stepper) not defined.'])
        return _rule["stepper"]

    def set_workers(self, workers):
        self._config.setdefault("output", {})["workers"] = int(workers)

    def set_output_dir(self, directory):
        self._config.setdefault("output", {})["directory"] = directory

    def echo(self):
        return copy.deepcopy(self._config)

    ### Validation ###

    def validate(self):
        '''Check every constraint and raise one ValidationError listing all violations.'''
        _err_list = []
        _mesh, _mat, _int = self._section("mesh"), self._section("material"), self._section("integrator")
        _pulse, _out = self._section("pulse"), self._section("output")

        if self.solver not in SOLVERS: _err_list.append(f'ERROR: solver must be one of {", ".join(SOLVERS)}, got {self.solver}.')

        def _number(section, values, key, kind=float, positive=True, minimum=None):
            if key not in values:
                _err_list.append(f'ERROR: {section}.{key} is required.')
                return None
            try:
                v = kind(values[key])
            except (TypeError, ValueError):
                _err_list.append(f'ERROR: {section}.{key}={values[key]!r} is not a valid {kind.__name__}.')
                return None
            if kind is int and float(values[key]) != v:
                _err_list.append(f'ERROR: {section}.{key}={values[key]!r} must be an integer.')
                return None
            if minimum is not None and v < minimum:
                _err_list.append(f'ERROR: {section}.{key}={v} must be >= {minimum}.')
            elif positive and minimum is None and not v > 0:
                _err_list.append(f'ERROR: {section}.{key}={v} must be > 0.')
            return v

        n_es = _number("mesh", _mesh, "n_es", int, minimum=1)
        n_ecp = _number("mesh", _mesh, "n_ecp", int, minimum=1)
        n_ef = _number("mesh", _mesh, "n_ef", int, minimum=1)
        n_el = _number("mesh", _mesh, "n_el", int, minimum=1)
        if n_ecp and n_ef:
            if n_ef < n_ecp: _err_list.append(f'ERROR: mesh.n_ef={n_ef} must be >= mesh.n_ecp={n_ecp}.')
            if n_ef % n_ecp != 0: _err_list.append(f'ERROR: mesh.n_ef={n_ef} must be divisible by mesh.n_ecp={n_ecp}.')

        _number("material", _mat, "contrast")
        fraction = _number("material", _mat, "fraction")
        if fraction is not None and not (0.0 < fraction < 1.0): _err_list.append(f'ERROR: material.fraction={fraction} must lie in (0, 1).')
        elif fraction is not None:
            if self.solver in ("vme", "both") and n_ef and abs(fraction * n_ef - round(fraction * n_ef)) > 1e-9:
                _err_list.append(f'ERROR: material.fraction x mesh.n_ef = {fraction * n_ef} must be an integer (phase boundaries on fine element boundaries).')
            if self.solver in ("dns", "both") and n_el and n_es:
                if n_el % n_es != 0: _err_list.append(f'ERROR: mesh.n_el={n_el} must be divisible by mesh.n_es={n_es}.')
                elif abs(fraction * (n_el // n_es) - round(fraction * (n_el // n_es))) > 1e-9:
                    _err_list.append(f'ERROR: material.fraction x elements per cell = {fraction * (n_el // n_es)} must be an integer.')

        if self.solver in ("vme", "both") and self.scheme not in self._section("schemes"):
            _err_list.append(f'ERROR: integrator.scheme={self.scheme!r} is not a registered scheme ({", ".join(self._section("schemes"))}).')
        if self.solver in ("dns", "both") and self.dns_scheme not in self._section("dns-schemes"):
            _err_list.append(f'ERROR: integrator.dns_scheme={self.dns_scheme!r} is not a registered DNS scheme ({", ".join(self._section("dns-schemes"))}).')
        _number("integrator", _int, "cfl")
        if "dns_cfl" in _int: _number("integrator", _int, "dns_cfl")
        p = _number("integrator", _int, "p")
        if p is not None and not (0.0 < p < 1.0): _err_list.append(f'ERROR: integrator.p={p} must lie in (0, 1).')
        for key in ("tol_c", "tol_f", "tol_newton", "denom_floor", "dt_floor"): _number("integrator", _int, key)
        for key in ("max_split_iters", "max_newton_iters"): _number("integrator", _int, key, int, minimum=1)
        if str(_int.get("coarse_solve", "condensed")) not in integrate.COARSE_SOLVES:
            _err_list.append(f'ERROR: integrator.coarse_solve={_int["coarse_solve"]!r} must be one of {", ".join(integrate.COARSE_SOLVES)}.')
        for key in ("freeze_fine", "coupling_mass"):
            try:
                str_to_bool(_int.get(key, False))
            except ValueError as e:
                _err_list.append(f'ERROR: integrator.{key}: {e}.')

        _number("pulse", _pulse, "a", positive=False)
        _number("pulse", _pulse, "c")

        _number("output", _out, "end_time", minimum=0.0)
        _number("output", _out, "workers", int, minimum=1)
        _times = _out.get("snapshot_times") or []
        if not isinstance(_times, list): _err_list.append("ERROR: output.snapshot_times must be a list.")
        else:
            for t in _times:
                if not isinstance(t, (int, float)) or t < 0: _err_list.append(f'ERROR: output.snapshot_times entry {t!r} must be a number >= 0.')

        for side in ("left", "right"):
            if str(self._section("boundary").get(side, "fixed")).lower() not in ("fixed", "free"):
                _err_list.append(f'ERROR: boundary.{side} must be fixed or free.')

        _scaling = self._config.get("scaling", None)
        if _scaling:
            for key in ("length", "modulus", "density"): _number("scaling", _scaling, key)

        if _err_list: raise ValidationError(_err_list)
        return self

def parse_config(text, verbose=False, defaults=True):
    '''Parse a run description (YAML text) on top of the defaults and validate it.'''
    run_config = RunConfig(verbose)
    if defaults: run_config.load_defaults()
    run_config.load_text(text)
    return run_config.validate()

def load_run_config(paths, verbose=True, defaults=True, overrides=None):
    run_config = RunConfig(verbose)
    if defaults: run_config.load_defaults()
    if run_config.load_config_globlist(paths) == 0:
        raise ParseError(f'ERROR: no config files found for {paths}.')
    if overrides: run_config.merge_config(overrides)
    return run_config.validate()
