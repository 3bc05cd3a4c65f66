#include <math.h>
#include <stdio.h>
#include "aerosim.h"

int main(void) {
    double pl = 0.0;
    if (aerosim_fspl_db(1000.0, 0.7, &pl) != AEROSIM_STATUS_OK || fabs(pl - 89.35) > 0.01) {
        return 1;
    }
    AerosimLayout *layout = NULL;
    if (aerosim_layout_new(1732.0, 37, 35.0, &layout) != AEROSIM_STATUS_OK) {
        return 2;
    }
    size_t cells = 0;
    aerosim_layout_n_cells(layout, &cells);
    aerosim_layout_free(layout);
    if (cells != 111) {
        return 3;
    }
    if (aerosim_fspl_db(-1.0, 0.7, &pl) != AEROSIM_STATUS_INVALID_ARGUMENT || aerosim_last_error() == NULL) {
        return 4;
    }
    printf("ok\n");
    return 0;
}
