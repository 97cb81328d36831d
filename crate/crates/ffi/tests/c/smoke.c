#include <math.h>
#include <stdio.h>
#include "pdkit.h"

int main(void) {
    PdRng *rng = pd_rng_new(42, 0);
    PdMassPartition *x = NULL;
    if (pd_sample_pd(0.5, 0.5, 1e-8, 1000, rng, &x) != PD_STATUS_OK) {
        fprintf(stderr, "%s\n", pd_last_error());
        return 1;
    }
    double sum = 0.0, a = 0.0, r = 0.0;
    for (size_t i = 0; i < pd_partition_len(x); i++) {
        pd_partition_atom(x, i, &a);
        sum += a;
    }
    pd_partition_residual(x, &r);
    PdMassPartition *bad = NULL;
    PdStatus s = pd_sample_pd(2.0, 0.5, 1e-8, 1000, rng, &bad);
    printf("%.12f %d\n", sum + r, (int)s);
    pd_partition_free(x);
    pd_rng_free(rng);
    return fabs(sum + r - 1.0) < 1e-12 && s == PD_STATUS_DOMAIN && bad == NULL ? 0 : 1;
}
