#include <stdio.h>
#include <string.h>
#include "cqbc.h"

int main(void) {
    const char *state = "[[[0.5,0.0],[0.0,0.0]],[[0.0,0.0],[0.5,0.0]]]";
    double s = 0.0;
    if (cqbc_entropy(state, &s) != CQBC_STATUS_OK) {
        fprintf(stderr, "%s\n", cqbc_last_error_message());
        return 1;
    }
    if (cqbc_entropy("[", &s) != CQBC_STATUS_PARSE) {
        return 2;
    }
    if (cqbc_entropy(NULL, &s) != CQBC_STATUS_NULL_POINTER) {
        return 3;
    }
    printf("%s %.12f\n", cqbc_version(), s);
    return 0;
}
