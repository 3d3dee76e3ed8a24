/*
 * Copyright 2026 SLTNet Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "sltnet/gemm.hpp"

#include <cblas.h>
#include <omp.h>

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

extern "C" void openblas_set_num_threads(int);

namespace sltnet {

namespace {

std::once_flag g_blas_once;
std::atomic<int> g_workers{0};

void init_blas() { openblas_set_num_threads(1); }

}  // namespace

int worker_threads() {
  int n = g_workers.load();
  if (n > 0) return n;
  if (const char* env = std::getenv("SLTNET_THREADS")) {
    n = std::atoi(env);
    if (n > 0) {
      g_workers.store(n);
      return n;
    }
  }
  n = static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  g_workers.store(n);
  return n;
}

void set_worker_threads(int n) {
  if (n > 0) g_workers.store(n);
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc) {
  std::call_once(g_blas_once, init_blas);
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc) {
  std::call_once(g_blas_once, init_blas);
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

}  // namespace sltnet
