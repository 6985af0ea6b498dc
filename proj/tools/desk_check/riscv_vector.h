// SPDX-License-Identifier: Apache-2.0
// Scalar stand-ins for the RVV intrinsics used by emitted kernels (VLEN 256, f32).
#include <stddef.h>
typedef struct { float v[8]; size_t n; } vfloat32m1_t;
static inline size_t vsetvl_e32m1(size_t n) { return n; }
static inline vfloat32m1_t vfmv_v_f_f32m1(float x, size_t vl) { vfloat32m1_t r; for (size_t i = 0; i < 8; i++) r.v[i] = x; r.n = vl; return r; }
static inline vfloat32m1_t vfmv_s_f_f32m1(float x, size_t vl) { vfloat32m1_t r = vfmv_v_f_f32m1(0, vl); r.v[0] = x; return r; }
static inline vfloat32m1_t vle32_v_f32m1(const float *p, size_t vl) { vfloat32m1_t r; for (size_t i = 0; i < vl; i++) r.v[i] = p[i]; r.n = vl; return r; }
static inline void vse32_v_f32m1(float *p, vfloat32m1_t a, size_t vl) { for (size_t i = 0; i < vl; i++) p[i] = a.v[i]; }
static inline vfloat32m1_t vfmacc_vv_f32m1(vfloat32m1_t acc, vfloat32m1_t a, vfloat32m1_t b, size_t vl) { for (size_t i = 0; i < vl; i++) acc.v[i] += a.v[i] * b.v[i]; return acc; }
static inline vfloat32m1_t vfredosum_vs_f32m1_f32m1(vfloat32m1_t v, vfloat32m1_t s, size_t vl) { float x = s.v[0]; for (size_t i = 0; i < vl; i++) x += v.v[i]; vfloat32m1_t r = v; r.v[0] = x; return r; }
static inline float vfmv_f_s_f32m1_f32(vfloat32m1_t a) { return a.v[0]; }
