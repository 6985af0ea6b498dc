// SPDX-License-Identifier: Apache-2.0
// Host driver: packs a random core, runs one emitted kernel, compares with a naive contraction.
#include <stdio.h>
#include <stdlib.h>
#include <math.h>
#include KFILE
#ifdef RR
#define RRV RR
#else
#define RRV 1
#endif
// G packed [MT][RT/(RR VL)][K][RR VL] for r-vec, [MT][K] for k-vec.
int main(void) {
    size_t gsz = (size_t)MT * RT * K, isz = (size_t)BT * K, osz = (size_t)MT * BT * RT;
    float *G = malloc(gsz * 4), *Gp = malloc(gsz * 4), *In = malloc(isz * 4), *Out = calloc(osz, 4);
    srand(1);
    for (size_t i = 0; i < gsz; i++) G[i] = rand() / (float)RAND_MAX - 0.5f;
    for (size_t i = 0; i < isz; i++) In[i] = rand() / (float)RAND_MAX - 0.5f;
    // natural order [RT][NT][MT][RT_1]
    for (size_t r = 0; r < RT; r++) for (size_t n = 0; n < NT; n++) for (size_t m = 0; m < MT; m++) for (size_t k = 0; k < RT_1; k++) {
        size_t kk = n * RT_1 + k, lanes = RT > 1 ? RRV * VL : 1, g = r / lanes, l = r % lanes, groups = RT > 1 ? RT / (RRV * VL) : 1;
        Gp[((m * groups + g) * K + kk) * lanes + l] = G[((r * NT + n) * MT + m) * RT_1 + k];
    }
    FN(Gp, In, Out);
    double err = 0;
    for (size_t m = 0; m < MT; m++) for (size_t b = 0; b < BT; b++) for (size_t r = 0; r < RT; r++) {
        double acc = 0;
        for (size_t n = 0; n < NT; n++) for (size_t k = 0; k < RT_1; k++) acc += (double)G[((r * NT + n) * MT + m) * RT_1 + k] * In[(b * NT + n) * RT_1 + k];
        double e = fabs(acc - Out[(m * BT + b) * RT + r]); if (e > err) err = e;
    }
    printf("max abs err %.3g\n", err);
    return err > 1e-3;
}
