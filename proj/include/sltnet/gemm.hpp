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
#ifndef SLTNET_GEMM_HPP
#define SLTNET_GEMM_HPP

namespace sltnet {

// Row-major C = alpha * op(A) * op(B) + beta * C, backed by OpenBLAS.
// The BLAS pool is pinned to one thread; callers parallelise over samples.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc);
void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc);

// Worker cap for OpenMP loops: SLTNET_THREADS env, else hardware count.
int worker_threads();
void set_worker_threads(int n);

}  // namespace sltnet

#endif  // SLTNET_GEMM_HPP
