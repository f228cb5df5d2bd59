#!/usr/bin/env python3
"""Regenerates the scripted-session and report fixtures under fixtures/.

Run from anywhere; output is deterministic. The files it writes are checked in,
so this only needs re-running after editing it.
"""
import json
import pathlib
import shutil

ROOT = pathlib.Path(__file__).resolve().parent

BENCH = {
    "a": [
        ("square_matmul", "Square MatMul", 1.16),
        ("standard_matmul", "Standard MatMul", 0.67),
        ("batched_matmul", "Batched MatMul", 0.53),
        ("matvec", "Matrix–Vector Multiply", 0.86),
        ("matscalar", "Matrix–Scalar Multiply", 1.02),
        ("large_k_matmul", "Large-k MatMul", 0.81),
        ("small_k_matmul", "Small-k MatMul", 0.98),
        ("irregular_matmul", "Irregular-Shape MatMul", 0.82),
        ("upper_tri_matmul", "Upper-Triangular MatMul", 0.71),
        ("lower_tri_matmul", "Lower-Triangular MatMul", 1.00),
        ("tensor3d_matmul", "3D Tensor MatMul", 0.43),
        ("diag_matmul", "MatMul with Diagonal Matrices", 17.66),
    ],
    "b": [
        ("relu", "ReLU", 1.01),
        ("leaky_relu", "Leaky ReLU", 1.00),
        ("sigmoid", "Sigmoid", 1.00),
        ("tanh", "Tanh", 1.00),
        ("softmax", "Softmax", 0.88),
        ("log_softmax", "LogSoftmax", 0.87),
        ("swish", "Swish", 2.45),
        ("gelu", "GELU", 1.01),
        ("selu", "SELU", 0.99),
        ("hard_sigmoid", "Hard Sigmoid", 0.94),
        ("softplus", "Softplus", 1.01),
        ("softsign", "Softsign", 3.45),
        ("elu", "ELU", 0.99),
        ("hardtanh", "HardTanh", 0.99),
    ],
}

REFERENCE_TIME_S = 1.0e-3

PROFILE_HEADER = ("grid_x,grid_y,grid_z,block_x,block_y,block_z,regs_per_thread,static_smem,"
                  "dynamic_smem,duration_us,achieved_occupancy_pct,mem_throughput_pct,compute_throughput_pct")


def write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def write_json(path, obj):
    write(path, json.dumps(obj, indent=2, ensure_ascii=False) + "\n")


def correct_reply(speedup, std_frac=0.02):
    cand = REFERENCE_TIME_S / speedup
    return {"status": "correct", "diagnostics": "", "max_abs_err": 2.4e-06, "max_rel_err": 1.1e-05,
            "failing_seed": None, "reference_time_s": REFERENCE_TIME_S, "candidate_time_s": cand,
            "candidate_time_std_s": cand * std_frac}


def fenced(code, lead):
    return f"{lead}\n\n```python\n{code}```\n"


MATMUL_REFERENCE = '''import torch
import torch.nn as nn


class Model(nn.Module):
    def __init__(self):
        super().__init__()

    def forward(self, A: torch.Tensor, B: torch.Tensor) -> torch.Tensor:
        return torch.matmul(A, B)


N = 2048


def get_inputs():
    return [torch.randn(N, N), torch.randn(N, N)]


def get_init_inputs():
    return []
'''

MATMUL_PRELUDE = '''import torch
import torch.nn as nn
from torch.utils.cpp_extension import load_inline

cuda_src = r"""
#include <cute/tensor.hpp>
#include <torch/extension.h>
using namespace cute;
'''

MATMUL_EPILOGUE = '''"""

cpp_src = "torch::Tensor matmul_cuda(torch::Tensor A, torch::Tensor B);"
ext = load_inline(name="{name}", cpp_sources=cpp_src, cuda_sources=cuda_src,
                  functions=["matmul_cuda"], extra_cuda_cflags=["-O3", "--use_fast_math"])


class ModelNew(nn.Module):
    def __init__(self):
        super().__init__()

    def forward(self, A, B):
        return ext.matmul_cuda(A.contiguous(), B.contiguous())
'''

NAIVE_KERNEL = '''
__global__ void matmul_naive(const float* A, const float* B, float* C, int N) {
    int row = blockIdx.y * blockDim.y + threadIdx.y;
    int col = blockIdx.x * blockDim.x + threadIdx.x;
    if (row < N && col < N) {
        float acc = 0.0f;
        for (int k = 0; k < N; ++k) {
            acc += A[row * N + k] * B[k * N + row];
        }
        C[row * N + col] = acc;
    }
}

torch::Tensor matmul_cuda(torch::Tensor A, torch::Tensor B) {
    int N = A.size(0);
    auto C = torch::empty({N, N}, A.options());
    dim3 block(16, 16);
    dim3 grid((N + 15) / 16, (N + 15) / 16);
    matmul_naive<<<grid, block>>>(A.data_ptr<float>(), B.data_ptr<float>(), C.data_ptr<float>(), N);
    return C;
}
'''

BUGGY_LINE = "            acc += A[row * N + k] * B[k * N + row];"
FIXED_LINE = "            acc += A[row * N + k] * B[k * N + col];"

TILED_KERNEL = '''
// {note}
template <int BM, int BN, int BK, int TM, int TN>
__global__ void matmul_tiled(const float* A, const float* B, float* C, int N) {{
    __shared__ float As[BK][BM + {pad}];
    __shared__ float Bs[BK][BN + {pad}];
    float acc[TM][TN] = {{}};
    int tr = threadIdx.x / (BN / TN), tc = threadIdx.x % (BN / TN);
    int row0 = blockIdx.y * BM, col0 = blockIdx.x * BN;
    for (int k0 = 0; k0 < N; k0 += BK) {{
        for (int i = threadIdx.x; i < BM * BK; i += blockDim.x) {{
            int r = i / BK, c = i % BK;
            As[c][r] = (row0 + r < N && k0 + c < N) ? A[(row0 + r) * N + k0 + c] : 0.0f;
        }}
        for (int i = threadIdx.x; i < BK * BN; i += blockDim.x) {{
            int r = i / BN, c = i % BN;
            Bs[r][c] = (k0 + r < N && col0 + c < N) ? B[(k0 + r) * N + col0 + c] : 0.0f;
        }}
        __syncthreads();
#pragma unroll
        for (int k = 0; k < BK; ++k) {{
            float a[TM], b[TN];
#pragma unroll
            for (int m = 0; m < TM; ++m) a[m] = As[k][tr * TM + m];
#pragma unroll
            for (int n = 0; n < TN; ++n) b[n] = Bs[k][tc * TN + n];
#pragma unroll
            for (int m = 0; m < TM; ++m)
#pragma unroll
                for (int n = 0; n < TN; ++n) acc[m][n] += a[m] * b[n];
        }}
        __syncthreads();
    }}
    for (int m = 0; m < TM; ++m)
        for (int n = 0; n < TN; ++n) {{
            int r = row0 + tr * TM + m, c = col0 + tc * TN + n;
            if (r < N && c < N) C[r * N + c] = acc[m][n];
        }}
}}

torch::Tensor matmul_cuda(torch::Tensor A, torch::Tensor B) {{
    int N = A.size(0);
    auto C = torch::empty({{N, N}}, A.options());
    constexpr int BM = {bm}, BN = {bn}, BK = {bk}, TM = {tm}, TN = {tn};
    dim3 grid((N + BN - 1) / BN, (N + BM - 1) / BM);
    matmul_tiled<BM, BN, BK, TM, TN><<<grid, (BM / TM) * (BN / TN)>>>(
        A.data_ptr<float>(), B.data_ptr<float>(), C.data_ptr<float>(), N);
    return C;
}}
'''

# (note, BM, BN, BK, TM, TN, pad, speedup)
MATMUL_STEPS = [
    ("shared-memory tiles, one output per thread", 16, 16, 16, 1, 1, 0, 0.55),
    ("32x32 tiles", 32, 32, 16, 1, 1, 0, 0.62),
    ("2x2 register blocking per thread", 32, 32, 16, 2, 2, 0, 0.70),
    ("4x4 register blocking per thread", 64, 64, 16, 4, 4, 0, 0.78),
    ("8x4 register blocking per thread", 64, 64, 8, 8, 4, 0, 0.74),
    ("4x4 blocking, padded shared memory against bank conflicts", 64, 64, 16, 4, 4, 1, 0.85),
    ("128x64 block tile", 128, 64, 16, 8, 4, 1, 0.92),
    ("128x128 block tile", 128, 128, 8, 8, 8, 1, 0.97),
    ("128x128 block tile, BK 16", 128, 128, 16, 8, 8, 1, 1.02),
    ("128x128 block tile, BK 16, transposed A staging", 128, 128, 16, 8, 8, 4, 1.05),
    ("launch shape tuned for occupancy from the profile", 128, 64, 16, 8, 8, 4, 1.12),
    ("register pressure reduced after profile review", 128, 64, 32, 8, 8, 4, 1.16),
]


def matmul_source(kernel, name):
    return MATMUL_PRELUDE + kernel + MATMUL_EPILOGUE.format(name=name)


def gen_matmul_session():
    d = ROOT / "sessions" / "matmul_square"
    if d.exists():
        shutil.rmtree(d)
    write(d / "reference.py", MATMUL_REFERENCE)
    write_json(d / "manifest.json", {
        "task_id": "matmul_square",
        "name": "Square MatMul",
        "workload_class": "matmul",
        "reference_source_path": "reference.py",
        "inputs": [{"shape": [2048, 2048], "dtype": "f32", "distribution": "normal"},
                   {"shape": [2048, 2048], "dtype": "f32", "distribution": "normal"}],
    })

    initial = matmul_source(NAIVE_KERNEL, "matmul_v0")
    lines = initial.split("\n")
    bug_line = lines.index(BUGGY_LINE) + 1
    responses = [{"kind": "initial", "text_file": "responses/initial.md"},
                 {"kind": "diagnosis", "text_file": "responses/diagnosis.md"},
                 {"kind": "repair", "text_file": "responses/repair.md"}]
    write(d / "responses" / "initial.md",
          fenced(initial, "Here is a first CuTe-based implementation of the square matmul."))
    write(d / "responses" / "diagnosis.md", f"""Analysis of the mismatch:

The kernel computes C[row][col] but reads B with the row index (`B[k * N + row]`) on
line {bug_line}. Every output element in a row therefore uses the same column of B,
which explains the large max abs error across all seeds. The B access must use
`col`. Nothing else in the kernel needs to change.
""")
    write(d / "responses" / "repair.md", f"""Fix the B index on line {bug_line}:

REPLACE {bug_line} {bug_line}
{FIXED_LINE}
END_EDIT
""")
    for i, (note, bm, bn, bk, tm, tn, pad, _) in enumerate(MATMUL_STEPS, 1):
        kernel = TILED_KERNEL.format(note=note, bm=bm, bn=bn, bk=bk, tm=tm, tn=tn, pad=pad)
        src = matmul_source(kernel, f"matmul_v{i}")
        write(d / "responses" / f"opt{i:02d}.md", fenced(src, f"Optimization {i}: {note}."))
        responses.append({"kind": "optimization", "text_file": f"responses/opt{i:02d}.md"})
    write_json(d / "script.json", {"responses": responses})

    replies = [{"status": "mismatch", "diagnostics": "output mismatch on trial 1 (seed 1000)",
                "max_abs_err": 91.73, "max_rel_err": 3.8, "failing_seed": 1000},
               correct_reply(0.40)]
    replies += [correct_reply(s[-1]) for s in MATMUL_STEPS]
    write_json(d / "executor.json", {"replies": replies, "profile_csv": "profile.csv"})
    write(d / "profile.csv", PROFILE_HEADER + "\n"
          "16,16,1,256,1,1,128,66560,0,812.4,31.2,58.7,71.9\n")


ACT_REFERENCE = '''import torch
import torch.nn as nn


class Model(nn.Module):
    def __init__(self):
        super().__init__()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x / (1 + torch.abs(x))


batch_size = 4096
dim = 393216


def get_inputs():
    return [torch.randn(batch_size, dim)]


def get_init_inputs():
    return []
'''

ACT_SOURCE = '''import torch
import torch.nn as nn
from torch.utils.cpp_extension import load_inline

cuda_src = r"""
#include <torch/extension.h>

// {note}
__global__ void softsign_kernel(const float* __restrict__ x, float* __restrict__ y, long n) {{
{body}
}}

torch::Tensor softsign_cuda(torch::Tensor x) {{
    auto y = torch::empty_like(x);
    long n = x.numel();
    int threads = {threads};
    long blocks = {blocks};
    softsign_kernel<<<blocks, threads>>>(x.data_ptr<float>(), y.data_ptr<float>(), n);
    return y;
}}
"""

ext = load_inline(name="softsign_v{version}", cpp_sources="torch::Tensor softsign_cuda(torch::Tensor x);",
                  cuda_sources=cuda_src, functions=["softsign_cuda"], extra_cuda_cflags=["-O3"])


class ModelNew(nn.Module):
    def __init__(self):
        super().__init__()

    def forward(self, x):
        return ext.softsign_cuda(x.contiguous())
'''

ACT_STEPS = [
    ("one element per thread", 256, "(n + 255) / 256",
     "    long i = blockIdx.x * (long)blockDim.x + threadIdx.x;\n"
     "    if (i < n) y[i] = x[i] / (1.0f + fabsf(x[i]));", 1.00),
    ("float4 vectorized loads and stores", 256, "(n / 4 + 255) / 256",
     "    long i = blockIdx.x * (long)blockDim.x + threadIdx.x;\n"
     "    if (4 * i + 3 < n) {\n"
     "        float4 v = reinterpret_cast<const float4*>(x)[i];\n"
     "        v.x = v.x / (1.0f + fabsf(v.x)); v.y = v.y / (1.0f + fabsf(v.y));\n"
     "        v.z = v.z / (1.0f + fabsf(v.z)); v.w = v.w / (1.0f + fabsf(v.w));\n"
     "        reinterpret_cast<float4*>(y)[i] = v;\n"
     "    } else {\n"
     "        for (long j = 4 * i; j < n; ++j) y[j] = x[j] / (1.0f + fabsf(x[j]));\n"
     "    }", 1.80),
    ("grid-stride float4 loop sized to the SM count", 512, "1024",
     "    long n4 = n / 4;\n"
     "    for (long i = blockIdx.x * (long)blockDim.x + threadIdx.x; i < n4; i += (long)gridDim.x * blockDim.x) {\n"
     "        float4 v = reinterpret_cast<const float4*>(x)[i];\n"
     "        v.x = v.x / (1.0f + fabsf(v.x)); v.y = v.y / (1.0f + fabsf(v.y));\n"
     "        v.z = v.z / (1.0f + fabsf(v.z)); v.w = v.w / (1.0f + fabsf(v.w));\n"
     "        reinterpret_cast<float4*>(y)[i] = v;\n"
     "    }\n"
     "    for (long j = 4 * n4 + blockIdx.x * (long)blockDim.x + threadIdx.x; j < n; j += (long)gridDim.x * blockDim.x)\n"
     "        y[j] = x[j] / (1.0f + fabsf(x[j]));", 2.90),
    ("fast reciprocal with two float4 per thread per iteration", 512, "1024",
     "    long n4 = n / 4;\n"
     "    long stride = (long)gridDim.x * blockDim.x;\n"
     "    for (long i = blockIdx.x * (long)blockDim.x + threadIdx.x; i < n4; i += 2 * stride) {\n"
     "        float4 a = reinterpret_cast<const float4*>(x)[i];\n"
     "        float4 b = i + stride < n4 ? reinterpret_cast<const float4*>(x)[i + stride] : make_float4(0, 0, 0, 0);\n"
     "        a.x *= __frcp_rn(1.0f + fabsf(a.x)); a.y *= __frcp_rn(1.0f + fabsf(a.y));\n"
     "        a.z *= __frcp_rn(1.0f + fabsf(a.z)); a.w *= __frcp_rn(1.0f + fabsf(a.w));\n"
     "        b.x *= __frcp_rn(1.0f + fabsf(b.x)); b.y *= __frcp_rn(1.0f + fabsf(b.y));\n"
     "        b.z *= __frcp_rn(1.0f + fabsf(b.z)); b.w *= __frcp_rn(1.0f + fabsf(b.w));\n"
     "        reinterpret_cast<float4*>(y)[i] = a;\n"
     "        if (i + stride < n4) reinterpret_cast<float4*>(y)[i + stride] = b;\n"
     "    }\n"
     "    for (long j = 4 * n4 + blockIdx.x * (long)blockDim.x + threadIdx.x; j < n; j += stride)\n"
     "        y[j] = x[j] / (1.0f + fabsf(x[j]));", 3.45),
]


def gen_activation_session():
    d = ROOT / "sessions" / "softsign"
    if d.exists():
        shutil.rmtree(d)
    write(d / "reference.py", ACT_REFERENCE)
    write_json(d / "manifest.json", {
        "task_id": "softsign",
        "name": "Softsign",
        "workload_class": "activation",
        "reference_source_path": "reference.py",
        "inputs": [{"shape": [4096, 393216], "dtype": "f32", "distribution": "normal"}],
    })
    responses = []
    for i, (note, threads, blocks, body, _) in enumerate(ACT_STEPS):
        src = ACT_SOURCE.format(note=note, threads=threads, blocks=blocks, body=body, version=i)
        name = "initial.md" if i == 0 else f"opt{i:02d}.md"
        write(d / "responses" / name, fenced(src, f"Softsign kernel: {note}."))
        responses.append({"kind": "initial" if i == 0 else "optimization", "text_file": f"responses/{name}"})
    write_json(d / "script.json", {"responses": responses})
    write_json(d / "executor.json", {"replies": [correct_reply(s[-1]) for s in ACT_STEPS],
                                     "profile_csv": "profile.csv"})
    write(d / "profile.csv", PROFILE_HEADER + "\n"
          "1024,1,1,512,1,1,32,0,0,2715.3,86.4,91.5,22.7\n")


def gen_profiles():
    d = ROOT / "profiles"
    # Two launches; the summary must come from the longer one.
    write(d / "profile.csv", PROFILE_HEADER + "\n"
          "8,1,1,128,1,1,16,0,0,3.2,12.5,4.1,2.0\n"
          '128,64,1,16,16,1,40,8192,1024,"1,234.5",62.5,71.3,55.8\n')
    write(d / "memory_bound.csv", PROFILE_HEADER + "\n"
          "4096,1,1,256,1,1,24,0,0,410.0,88.0,80.1,39.9\n")
    write(d / "latency_bound.csv", PROFILE_HEADER + "\n"
          "32,1,1,64,1,1,24,0,0,15.5,71.0,39.9,39.9\n")
    write(d / "occupancy_limited.csv", PROFILE_HEADER + "\n"
          "256,256,1,16,16,1,168,49152,0,905.0,49.9,62.0,74.0\n")
    write(d / "missing_duration.csv", PROFILE_HEADER.replace("duration_us,", "") + "\n"
          "8,1,1,128,1,1,16,0,0,12.5,4.1,2.0\n")


BENCH_INITIAL = '''import torch
import torch.nn as nn


class ModelNew(nn.Module):
    def __init__(self):
        super().__init__()

    def forward(self, *args):
        raise NotImplementedError("placeholder kernel for report fixtures")
'''


def gen_bench():
    d = ROOT / "bench"
    if d.exists():
        shutil.rmtree(d)
    write_json(d / "expected_speedups.json", {
        part: [{"kernel": name, "speedup": s} for _, name, s in rows] for part, rows in BENCH.items()})
    write_json(d / "script.json", {"responses": [
        {"kind": "initial", "text": fenced(BENCH_INITIAL, "Kernel:")}]})
    for part, rows in BENCH.items():
        workload = "matmul" if part == "a" else "activation"
        for i, (slug, name, speedup) in enumerate(rows, 1):
            t = d / part / f"{i:02d}_{slug}"
            write(t / "reference.py", f"# reference for {name}\n")
            write_json(t / "manifest.json", {
                "task_id": slug, "name": name, "workload_class": workload,
                "reference_source_path": "reference.py",
                "inputs": [{"shape": [1024, 1024], "dtype": "f32", "distribution": "normal"}]})
            write_json(t / "executor.json", {"replies": [correct_reply(speedup)]})


if __name__ == "__main__":
    gen_matmul_session()
    gen_activation_session()
    gen_profiles()
    gen_bench()
