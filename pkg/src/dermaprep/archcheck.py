"""Static CNN shape/parameter checking and the architecture description DSL.

An architecture file declares an input shape and a layer list; each layer may
carry a declared output shape (``expect C H W``). `trace` folds the shape
arithmetic through the layers and compares inferred against declared shapes.
When a declared shape disagrees with the inferred one, the trace records the
mismatch and *continues from the declared shape*, so a single wrong row is
flagged exactly once instead of cascading into every later layer.

Layers tagged ``share NAME`` form coupling groups across networks;
`verify_coupling` checks every member of a group has an identical layer
signature (kind, channels, kernel, stride, padding, dilation, factor).
"""

import re
from dataclasses import dataclass, field
from importlib import resources

_LAYER_KINDS = ("conv", "transconv", "maxpool", "upconv", "upsample")


class ArchError(Exception):
    """Base for architecture file / arithmetic problems."""


class ArchParseError(ArchError):
    def __init__(self, message, line_no=None):
        self.line_no = line_no
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(prefix + message)


class ShapeCollapseError(ArchError):
    """A spatial dimension was inferred as < 1."""


def conv_output_size(size, kernel, stride, padding, dilation=1):
    """floor((size + 2p - d*(k-1) - 1) / s) + 1, rejecting results < 1."""
    _check_geometry(size, kernel, stride, padding, dilation)
    out = (size + 2 * padding - dilation * (kernel - 1) - 1) // stride + 1
    if out < 1:
        raise ShapeCollapseError(
            f"conv collapses size {size} to {out} (k={kernel} s={stride} p={padding} d={dilation})"
        )
    return out


def transconv_output_size(size, kernel, stride, padding, dilation=1):
    """(size - 1)*s - 2p + d*(k-1) + 1, rejecting results < 1."""
    _check_geometry(size, kernel, stride, padding, dilation)
    out = (size - 1) * stride - 2 * padding + dilation * (kernel - 1) + 1
    if out < 1:
        raise ShapeCollapseError(
            f"transconv collapses size {size} to {out} (k={kernel} s={stride} p={padding} d={dilation})"
        )
    return out


def upconv_output_size(size, factor, kernel, stride, padding):
    """Nearest-neighbor upsample by `factor`, then a regular convolution."""
    if factor < 1:
        raise ValueError(f"upsample factor must be >= 1, got {factor}")
    return conv_output_size(size * factor, kernel, stride, padding, 1)


def _check_geometry(size, kernel, stride, padding, dilation):
    if size < 1:
        raise ValueError(f"input size must be >= 1, got {size}")
    if kernel < 1:
        raise ValueError(f"kernel must be >= 1, got {kernel}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if padding < 0:
        raise ValueError(f"padding must be >= 0, got {padding}")
    if dilation < 1:
        raise ValueError(f"dilation must be >= 1, got {dilation}")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    out_channels: int = 0  # ignored for maxpool/upsample (channels pass through)
    kernel: int = 1
    stride: int = 1
    padding: int = 0
    dilation: int = 1
    factor: int = 1  # upconv/upsample only
    declared_out: tuple = None  # (C, H, W) from an `expect` clause
    share: str = None

    def __post_init__(self):
        if self.kind not in _LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind in ("conv", "transconv", "upconv") and self.out_channels < 1:
            raise ValueError(f"{self.kind} needs out_channels >= 1")

    def signature(self, in_channels):
        out = self.out_channels if self.kind in ("conv", "transconv", "upconv") else in_channels
        return (
            self.kind,
            in_channels,
            out,
            self.kernel,
            self.stride,
            self.padding,
            self.dilation,
            self.factor,
        )


@dataclass
class ArchSpec:
    name: str
    input_shape: tuple  # (C, H, W)
    layers: list

    def __post_init__(self):
        c, h, w = self.input_shape
        if min(c, h, w) < 1:
            raise ValueError(f"input shape must be positive, got {self.input_shape}")
        if not self.layers:
            raise ValueError(f"architecture {self.name!r} has no layers")


@dataclass
class LayerTrace:
    index: int
    layer: LayerSpec
    in_shape: tuple
    out_shape: tuple
    params: int
    match: bool = None  # None when the layer declares nothing


@dataclass
class ShapeTrace:
    name: str
    input_shape: tuple
    layers: list = field(default_factory=list)

    @property
    def total_params(self):
        return sum(t.params for t in self.layers)

    @property
    def all_match(self):
        return all(t.match is not False for t in self.layers)

    def mismatches(self):
        return [t for t in self.layers if t.match is False]


def param_count(layer, in_channels, include_bias=True):
    """Learnable parameter count: in*out*k^2 (+ out bias) for weighted layers."""
    if layer.kind in ("maxpool", "upsample"):
        return 0
    n = in_channels * layer.out_channels * layer.kernel * layer.kernel
    return n + (layer.out_channels if include_bias else 0)


def _infer(layer, shape):
    c, h, w = shape
    if layer.kind == "conv":
        return (
            layer.out_channels,
            conv_output_size(h, layer.kernel, layer.stride, layer.padding, layer.dilation),
            conv_output_size(w, layer.kernel, layer.stride, layer.padding, layer.dilation),
        )
    if layer.kind == "transconv":
        return (
            layer.out_channels,
            transconv_output_size(h, layer.kernel, layer.stride, layer.padding, layer.dilation),
            transconv_output_size(w, layer.kernel, layer.stride, layer.padding, layer.dilation),
        )
    if layer.kind == "maxpool":
        return (
            c,
            conv_output_size(h, layer.kernel, layer.stride, 0, 1),
            conv_output_size(w, layer.kernel, layer.stride, 0, 1),
        )
    if layer.kind == "upconv":
        return (
            layer.out_channels,
            upconv_output_size(h, layer.factor, layer.kernel, layer.stride, layer.padding),
            upconv_output_size(w, layer.factor, layer.kernel, layer.stride, layer.padding),
        )
    # upsample
    return (c, h * layer.factor, w * layer.factor)


def trace(spec, include_bias=True):
    """Fold shapes through `spec`, comparing inferred vs declared outputs.

    After a layer with a declared output, the running shape is reset to the
    declaration (whether or not it matched), isolating each comparison.
    """
    shape = tuple(spec.input_shape)
    result = ShapeTrace(spec.name, shape)
    for i, layer in enumerate(spec.layers):
        inferred = _infer(layer, shape)
        params = param_count(layer, shape[0], include_bias)
        match = None if layer.declared_out is None else (tuple(layer.declared_out) == inferred)
        result.layers.append(LayerTrace(i, layer, shape, inferred, params, match))
        shape = tuple(layer.declared_out) if layer.declared_out is not None else inferred
    return result


@dataclass(frozen=True)
class CouplingViolation:
    tag: str
    reference: str  # "arch[i]" of the first member
    offender: str
    detail: str


_SIG_FIELDS = ("kind", "in_ch", "out_ch", "kernel", "stride", "padding", "dilation", "factor")


def verify_coupling(specs):
    """Check layers sharing a tag have identical signatures across networks.

    Returns a list of CouplingViolation (empty when every group agrees).
    """
    if len(specs) < 2:
        raise ValueError("coupling verification needs at least two architectures")
    groups = {}
    for spec in specs:
        t = trace(spec)
        for lt in t.layers:
            tag = lt.layer.share
            if tag:
                where = f"{spec.name}[{lt.index}]"
                groups.setdefault(tag, []).append((where, lt.layer.signature(lt.in_shape[0])))
    violations = []
    for tag in sorted(groups):
        members = groups[tag]
        ref_where, ref_sig = members[0]
        for where, sig in members[1:]:
            if sig != ref_sig:
                diffs = [
                    f"{name}: {a} != {b}"
                    for name, a, b in zip(_SIG_FIELDS, ref_sig, sig)
                    if a != b
                ]
                violations.append(
                    CouplingViolation(tag, ref_where, where, "; ".join(diffs))
                )
    return violations


# ---------------------------------------------------------------------------
# DSL parsing
#
# file    := (comment | blank | stanza)*
# stanza  := ["arch" NAME] "input" C H W layer+
# layer   := conv OUT kKxK sS pP dD [expect C H W] [share TAG]
#          | transconv OUT kKxK sS pP dD [expect C H W] [share TAG]
#          | maxpool kKxK sS [expect C H W]
#          | upconv FACTOR OUT kKxK sS pP [expect C H W] [share TAG]
#          | upsample FACTOR [expect C H W]

_K_RE = re.compile(r"^k(\d+)x(\d+)$")
_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.-]*$")


def _tagged_int(tok, prefix, line_no):
    if not tok.startswith(prefix) or not tok[len(prefix):].isdigit():
        raise ArchParseError(f"expected {prefix}<int>, got {tok!r}", line_no)
    return int(tok[len(prefix):])


def _plain_int(tok, what, line_no):
    if not tok.isdigit():
        raise ArchParseError(f"expected {what} as a positive integer, got {tok!r}", line_no)
    return int(tok)


def _kernel(tok, line_no):
    m = _K_RE.match(tok)
    if not m:
        raise ArchParseError(f"expected kKxK, got {tok!r}", line_no)
    a, b = int(m.group(1)), int(m.group(2))
    if a != b:
        raise ArchParseError(f"only square kernels are supported, got {tok!r}", line_no)
    return a


def _take_suffix(toks, line_no):
    """Pop optional `expect C H W` then optional `share TAG` from the tail."""
    declared = None
    share = None
    if toks and toks[0] == "expect":
        if len(toks) < 4:
            raise ArchParseError("expect needs three integers: C H W", line_no)
        declared = tuple(_plain_int(t, "expect dimension", line_no) for t in toks[1:4])
        toks = toks[4:]
    if toks and toks[0] == "share":
        if len(toks) < 2:
            raise ArchParseError("share needs a tag name", line_no)
        if not _NAME_RE.match(toks[1]):
            raise ArchParseError(f"bad share tag {toks[1]!r}", line_no)
        share = toks[1]
        toks = toks[2:]
    if toks:
        raise ArchParseError(f"unexpected trailing tokens: {' '.join(toks)}", line_no)
    return declared, share


def _parse_layer(toks, line_no):
    kind = toks[0]
    rest = toks[1:]
    try:
        if kind in ("conv", "transconv"):
            if len(rest) < 5:
                raise ArchParseError(f"{kind} needs OUT kKxK sS pP dD", line_no)
            out = _plain_int(rest[0], "out channels", line_no)
            k = _kernel(rest[1], line_no)
            s = _tagged_int(rest[2], "s", line_no)
            p = _tagged_int(rest[3], "p", line_no)
            d = _tagged_int(rest[4], "d", line_no)
            declared, share = _take_suffix(rest[5:], line_no)
            return LayerSpec(kind, out, k, s, p, d, 1, declared, share)
        if kind == "maxpool":
            if len(rest) < 2:
                raise ArchParseError("maxpool needs kKxK sS", line_no)
            k = _kernel(rest[0], line_no)
            s = _tagged_int(rest[1], "s", line_no)
            declared, share = _take_suffix(rest[2:], line_no)
            if share:
                raise ArchParseError("maxpool has no weights to share", line_no)
            return LayerSpec("maxpool", 0, k, s, 0, 1, 1, declared, None)
        if kind == "upconv":
            if len(rest) < 5:
                raise ArchParseError("upconv needs FACTOR OUT kKxK sS pP", line_no)
            factor = _plain_int(rest[0], "factor", line_no)
            out = _plain_int(rest[1], "out channels", line_no)
            k = _kernel(rest[2], line_no)
            s = _tagged_int(rest[3], "s", line_no)
            p = _tagged_int(rest[4], "p", line_no)
            declared, share = _take_suffix(rest[5:], line_no)
            return LayerSpec("upconv", out, k, s, p, 1, factor, declared, share)
        if kind == "upsample":
            if len(rest) < 1:
                raise ArchParseError("upsample needs FACTOR", line_no)
            factor = _plain_int(rest[0], "factor", line_no)
            declared, share = _take_suffix(rest[1:], line_no)
            if share:
                raise ArchParseError("upsample has no weights to share", line_no)
            return LayerSpec("upsample", 0, 1, 1, 0, 1, factor, declared, None)
    except ValueError as e:
        raise ArchParseError(str(e), line_no) from None
    raise ArchParseError(f"unknown layer kind {kind!r}", line_no)


def parse_arch_text(text, default_name="arch"):
    """Parse one or more architectures from DSL text."""
    specs = []
    name = None
    input_shape = None
    layers = []
    started = False  # saw any stanza content

    def flush(line_no):
        nonlocal name, input_shape, layers
        if input_shape is None:
            raise ArchParseError(f"architecture {name!r} has no input line", line_no)
        if not layers:
            raise ArchParseError(f"architecture {name!r} has no layers", line_no)
        specs.append(ArchSpec(name, input_shape, layers))
        name, input_shape, layers = None, None, []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if toks[0] == "arch":
            if len(toks) != 2 or not _NAME_RE.match(toks[1]):
                raise ArchParseError("arch needs a single name", line_no)
            if started:
                flush(line_no)
            name = toks[1]
            started = True
            continue
        if toks[0] == "input":
            if input_shape is not None:
                raise ArchParseError("second input line (missing `arch NAME`?)", line_no)
            if len(toks) != 4:
                raise ArchParseError("input needs three integers: C H W", line_no)
            input_shape = tuple(_plain_int(t, "input dimension", line_no) for t in toks[1:])
            if name is None:
                name = default_name
            started = True
            continue
        if input_shape is None:
            raise ArchParseError(f"layer before input line: {line!r}", line_no)
        layers.append(_parse_layer(toks, line_no))

    if not started:
        raise ArchParseError("empty architecture file")
    flush(None)
    dupes = {s.name for s in specs if sum(t.name == s.name for t in specs) > 1}
    if dupes:
        raise ArchParseError(f"duplicate architecture names: {sorted(dupes)}")
    return specs


def parse_arch_file(path):
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    stem = str(path).rsplit("/", 1)[-1]
    stem = stem[:-5] if stem.endswith(".arch") else stem
    return parse_arch_text(text, default_name=stem)


def builtin_arch_names():
    pkg = resources.files("dermaprep.arch")
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".arch"))


def load_builtin(name):
    """Parse one of the .arch files shipped inside the package."""
    pkg = resources.files("dermaprep.arch")
    candidate = pkg / f"{name}.arch"
    if not candidate.is_file():
        raise ArchError(f"no builtin architecture {name!r}; have {builtin_arch_names()}")
    return parse_arch_text(candidate.read_text(encoding="utf-8"), default_name=name)


def format_trace(t):
    """Human-readable per-layer table for a ShapeTrace."""
    lines = [f"{t.name}: input {t.input_shape[0]}x{t.input_shape[1]}x{t.input_shape[2]}"]
    header = f"  {'#':>2} {'layer':<10} {'in':>12} {'inferred':>12} {'declared':>12} {'params':>10} status"
    lines.append(header)
    for lt in t.layers:
        shp = "x".join(str(v) for v in lt.out_shape)
        inshp = "x".join(str(v) for v in lt.in_shape)
        if lt.match is None:
            declared, status = "-", "-"
        else:
            declared = "x".join(str(v) for v in lt.layer.declared_out)
            status = "ok" if lt.match else "MISMATCH"
        lines.append(
            f"  {lt.index:>2} {lt.layer.kind:<10} {inshp:>12} {shp:>12} {declared:>12} {lt.params:>10} {status}"
        )
    lines.append(f"  total params {t.total_params}")
    return "\n".join(lines)
