#include <stdio.h>
#include <string.h>
#include "lmabo.h"

#define CHECK(cond) do { if (!(cond)) { fprintf(stderr, "check failed: %s (line %d)\n", #cond, __LINE__); return 1; } } while (0)

int main(void) {
    LmaboProblem *p = NULL;
    CHECK(lmabo_problem_new("SixHumpCamel", &p) == LMABO_STATUS_OK);
    size_t dim = 0;
    CHECK(lmabo_problem_dim(p, &dim) == LMABO_STATUS_OK && dim == 2);
    double x[2] = {0.0898, -0.7126}, v = 0.0;
    CHECK(lmabo_problem_evaluate(p, x, 2, &v) == LMABO_STATUS_OK);
    CHECK(v < -1.0316 && v > -1.0317);
    lmabo_problem_free(p);

    LmaboProblem *missing = NULL;
    CHECK(lmabo_problem_new("NoSuchProblem", &missing) == LMABO_STATUS_NOT_FOUND);
    char msg[256];
    CHECK(lmabo_last_error(msg, sizeof msg, NULL) == LMABO_STATUS_OK && strstr(msg, "NoSuchProblem") != NULL);

    double ranks[12] = {1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 2, 3};
    double stat = 0.0, pval = 0.0;
    CHECK(lmabo_friedman(ranks, 4, 3, &stat, &pval) == LMABO_STATUS_OK);
    CHECK(stat > 7.999999 && stat < 8.000001 && pval > 0.0173 && pval < 0.0193);

    char tag[8];
    int fallback = -1;
    CHECK(lmabo_parse_decision("qJES: keep searching", tag, sizeof tag, NULL, &fallback) == LMABO_STATUS_OK);
    CHECK(strcmp(tag, "JES") == 0 && fallback == 0);
    printf("ok %s\n", lmabo_version());
    return 0;
}
