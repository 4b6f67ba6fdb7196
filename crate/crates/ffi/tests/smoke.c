#include <stdio.h>
#include "qpe_lab.h"

int main(void) {
    uint64_t k = 0;
    double eps = 0.0;
    if (qpe_shot_bound(1008, 27, 0.001, 0.0, &k, &eps) != QPE_STATUS_OK) {
        fprintf(stderr, "%s\n", qpe_last_error());
        return 1;
    }
    double phases[2] = {0.125, 0.625};
    QpeSpectrum *s = NULL;
    if (qpe_spectrum_new(phases, 2, &s) != QPE_STATUS_OK) return 2;
    QpeEmpirical *e = NULL;
    if (qpe_sample(s, NULL, 4, 1000, 1, 0, &e) != QPE_STATUS_OK) return 3;
    if (qpe_empirical_count(e, 2) + qpe_empirical_count(e, 10) != 1000) return 4;
    qpe_empirical_free(e);
    qpe_spectrum_free(s);
    printf("%llu\n", (unsigned long long)k);
    return 0;
}
