#!/usr/bin/env python3
"""Torch twin of the fringe network: FTBW export, parity fixture, training.

  fringe_net_torch.py fixture --out tests/data [--seed 7]
  fringe_net_torch.py train --data DIR --out data/fringe_net.ftbw [--steps 800]
"""

import argparse
import hashlib
import struct
import sys
import time
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

# (tag, kind, out, in, source)
LAYERS = [
    (1, "cbr", 16, 2, 0), (2, "cbr", 32, 16, 0), (3, "cbr", 64, 32, 0),
    (4, "cbr", 64, 64, 0), (5, "cbr", 64, 64, 0), (6, "add", 64, 64, 3),
    (7, "cbr", 32, 64, 0), (8, "add", 32, 32, 2), (9, "cbr", 16, 32, 0),
    (10, "add", 16, 16, 1), (11, "conv", 1, 16, 0),
]


class FringeNet(nn.Module):
    def __init__(self):
        super().__init__()
        for tag, kind, out, inp, _ in LAYERS:
            if kind == "add":
                continue
            setattr(self, f"conv{tag}", nn.Conv2d(inp, out, 3, padding=0))
            if kind == "cbr":
                setattr(self, f"bn{tag}", nn.BatchNorm2d(out))

    def forward(self, x):
        outputs = {}
        for tag, kind, _, _, source in LAYERS:
            if kind == "add":
                x = x + outputs[source]
            else:
                x = getattr(self, f"conv{tag}")(F.pad(x, (1, 1, 1, 1), mode="reflect"))
                if kind == "cbr":
                    x = F.relu(getattr(self, f"bn{tag}")(x))
            outputs[tag] = x
        return x


def ftbw_tensors(model):
    out = []
    for tag, kind, _, _, _ in LAYERS:
        if kind == "add":
            continue
        conv = getattr(model, f"conv{tag}")
        out += [(f"conv{tag}.w", conv.weight), (f"conv{tag}.b", conv.bias)]
        if kind == "cbr":
            bn = getattr(model, f"bn{tag}")
            out += [(f"bn{tag}.gamma", bn.weight), (f"bn{tag}.beta", bn.bias),
                    (f"bn{tag}.mean", bn.running_mean), (f"bn{tag}.var", bn.running_var),
                    (f"bn{tag}.eps", torch.tensor([bn.eps]))]
    return out


def write_ftbw(model, path):
    tensors = ftbw_tensors(model)
    with open(path, "wb") as f:
        f.write(b"FTBW" + struct.pack("<II", 1, len(tensors)))
        for name, t in tensors:
            data = t.detach().to(torch.float32).cpu().numpy()
            raw = name.encode()
            f.write(struct.pack("<H", len(raw)) + raw + struct.pack("<B", data.ndim))
            f.write(struct.pack(f"<{data.ndim}I", *data.shape))
            f.write(data.astype("<f4").tobytes())


def read_ftbw(path):
    buf = Path(path).read_bytes()
    if buf[:4] != b"FTBW":
        raise ValueError(f"{path}: bad magic")
    version, count = struct.unpack_from("<II", buf, 4)
    pos, out = 12, {}
    for _ in range(count):
        (n,) = struct.unpack_from("<H", buf, pos)
        name = buf[pos + 2:pos + 2 + n].decode()
        pos += 2 + n
        rank = buf[pos]
        dims = struct.unpack_from(f"<{rank}I", buf, pos + 1)
        pos += 1 + 4 * rank
        size = int(np.prod(dims)) if rank else 1
        out[name] = np.frombuffer(buf, "<f4", size, pos).reshape(dims).copy()
        pos += 4 * size
    return out


def load_into(model, path):
    tensors = read_ftbw(path)
    with torch.no_grad():
        for name, t in ftbw_tensors(model):
            if name.endswith(".eps"):
                continue
            t.copy_(torch.from_numpy(tensors[name]))


def read_pfm(path):
    with open(path, "rb") as f:
        kind = f.readline().strip()
        w, h = map(int, f.readline().split())
        scale = float(f.readline())
        channels = 3 if kind == b"PF" else 1
        data = np.frombuffer(f.read(), "<f4" if scale < 0 else ">f4")
    img = data.reshape(h, w, channels)[::-1]
    return np.ascontiguousarray(img.transpose(2, 0, 1)).astype(np.float32)


def write_pfm(path, planes):
    planes = np.asarray(planes, dtype=np.float32)
    c, h, w = planes.shape
    with open(path, "wb") as f:
        f.write(b"PF\n" if c == 3 else b"Pf\n")
        f.write(f"{w} {h}\n-1.0\n".encode())
        f.write(np.ascontiguousarray(planes.transpose(1, 2, 0)[::-1]).astype("<f4").tobytes())


def residual_loss(phi, zc, zg, uc, ug):
    """Per-image sum of the red and blue mean residuals, averaged over the batch.

    Samples are laid out [red of pairs 0..n-1, blue of pairs 0..n-1]."""
    r = ((uc - ug) - (zc - phi - zg)).abs().mean(dim=(1, 2, 3))
    return r.view(2, -1).sum(0).mean()


def cmd_fixture(args):
    torch.manual_seed(args.seed)
    model = FringeNet().double()
    with torch.no_grad():
        for name, t in ftbw_tensors(model):
            if name.endswith(".w"):
                pass  # default Kaiming-uniform init
            elif name.endswith(".b") or name.endswith(".beta") or name.endswith(".mean"):
                t.normal_(0.0, 0.1)
            elif name.endswith(".gamma") or name.endswith(".var"):
                t.uniform_(0.5, 1.5)
    model.eval()
    x = torch.rand(1, 2, 16, 16, dtype=torch.float64)
    # Round inputs and weights to float32 so both sides see the same values.
    x = x.float().double()
    with torch.no_grad():
        for _, t in ftbw_tensors(model):
            t.copy_(t.float().double())
        y = model(x)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_ftbw(model, out / "fixture_weights.ftbw")
    write_pfm(out / "fixture_zc.pfm", x[0, :1].numpy())
    write_pfm(out / "fixture_zg.pfm", x[0, 1:].numpy())
    write_pfm(out / "fixture_phi.pfm", y[0].numpy())
    print(f"fixture written to {out}, output range [{y.min():.3f}, {y.max():.3f}]")


def load_pairs(data_dir):
    data_dir = Path(data_dir)
    rows = (data_dir / "manifest.tsv").read_text().splitlines()[1:]
    ids = [r.split("\t")[0] for r in rows if r.strip()]
    first = read_pfm(data_dir / "clean" / f"{ids[0]}.pfm")
    clean = np.empty((len(ids),) + first.shape, np.float32)
    deblurred = np.empty_like(clean)
    for k, i in enumerate(ids):
        clean[k] = read_pfm(data_dir / "clean" / f"{i}.pfm")
        deblurred[k] = read_pfm(data_dir / "deblurred" / f"{i}.pfm")
    is_val = np.array([hashlib.sha1(i.encode()).digest()[0] < 26 for i in ids])
    return torch.from_numpy(clean), torch.from_numpy(deblurred), is_val


def make_batch(u, z, crop, gen):
    """Random crops; each pair yields a red and a blue sample (2N supervisions)."""
    n, _, h, w = u.shape
    ys = torch.randint(0, h - crop + 1, (n,), generator=gen)
    xs = torch.randint(0, w - crop + 1, (n,), generator=gen)
    u = torch.stack([u[i, :, ys[i]:ys[i] + crop, xs[i]:xs[i] + crop] for i in range(n)])
    z = torch.stack([z[i, :, ys[i]:ys[i] + crop, xs[i]:xs[i] + crop] for i in range(n)])
    zc = torch.cat([z[:, 0:1], z[:, 2:3]])
    zg = torch.cat([z[:, 1:2], z[:, 1:2]])
    uc = torch.cat([u[:, 0:1], u[:, 2:3]])
    ug = torch.cat([u[:, 1:2], u[:, 1:2]])
    return zc, zg, uc, ug


def evaluate(model, u, z, chunk=8):
    model.eval()
    total = 0.0
    with torch.no_grad():
        for i in range(0, len(u), chunk):
            zc, zg, uc, ug = make_batch(u[i:i + chunk], z[i:i + chunk], u.shape[-1],
                                        torch.Generator().manual_seed(0))
            phi = model(torch.cat([zc, zg], 1))
            total += residual_loss(phi, zc, zg, uc, ug).item() * (len(zc) // 2)
    model.train()
    return total / len(u)


def cmd_train(args):
    torch.manual_seed(args.seed)
    u, z, is_val = load_pairs(args.data)
    train_idx = torch.from_numpy(np.flatnonzero(~is_val))
    val_idx = torch.from_numpy(np.flatnonzero(is_val)[:args.val_pairs])
    u_va, z_va = u[val_idx], z[val_idx]
    print(f"{len(train_idx)} training pairs, {len(val_idx)} validation pairs", flush=True)
    model = FringeNet()
    if args.init:
        load_into(model, args.init)
    opt = torch.optim.Adam(model.parameters(), lr=args.lr)
    sched = torch.optim.lr_scheduler.ReduceLROnPlateau(opt, factor=0.5, patience=args.patience)
    gen = torch.Generator().manual_seed(args.seed)
    best = float("inf")
    curve = open(args.curve, "w") if args.curve else None
    if curve:
        curve.write("step\ttrain_loss\tval_loss\tlr\n")
    start = time.time()
    smoothed = None
    for step in range(1, args.steps + 1):
        idx = train_idx[torch.randint(0, len(train_idx), (args.batch,), generator=gen)]
        zb = z[idx]
        # Aligned samples: input equals target, so the ideal correction is zero.
        k = int(round(args.identity_frac * args.batch))
        zb[:k] = u[idx[:k]]
        zc, zg, uc, ug = make_batch(u[idx], zb, args.crop, gen)
        loss = residual_loss(model(torch.cat([zc, zg], 1)), zc, zg, uc, ug)
        if not torch.isfinite(loss):
            sys.exit(f"non-finite loss at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        smoothed = loss.item() if smoothed is None else 0.95 * smoothed + 0.05 * loss.item()
        if step % args.eval_every == 0 or step == args.steps:
            val = evaluate(model, u_va, z_va)
            sched.step(val)
            lr = opt.param_groups[0]["lr"]
            if curve:
                curve.write(f"{step}\t{smoothed:.6f}\t{val:.6f}\t{lr:.2e}\n")
                curve.flush()
            marker = ""
            if val < best:
                best = val
                model.eval()
                write_ftbw(model, args.out)
                model.train()
                marker = " *"
            print(f"step {step} train {smoothed:.5f} val {val:.5f} lr {lr:.1e} "
                  f"{time.time() - start:.0f}s{marker}", flush=True)
    print(f"best validation loss {best:.5f}; weights in {args.out}")


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawTextHelpFormatter)
    sub = p.add_subparsers(dest="cmd", required=True)
    f = sub.add_parser("fixture")
    f.add_argument("--out", required=True)
    f.add_argument("--seed", type=int, default=7)
    t = sub.add_parser("train")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--init")
    t.add_argument("--steps", type=int, default=800)
    t.add_argument("--batch", type=int, default=16)
    t.add_argument("--crop", type=int, default=64)
    t.add_argument("--lr", type=float, default=3e-4)
    t.add_argument("--patience", type=int, default=10)
    t.add_argument("--eval-every", type=int, default=50)
    t.add_argument("--val-pairs", type=int, default=64)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--identity-frac", type=float, default=0.0)
    t.add_argument("--curve")
    args = p.parse_args()
    {"fixture": cmd_fixture, "train": cmd_train}[args.cmd](args)


if __name__ == "__main__":
    main()
