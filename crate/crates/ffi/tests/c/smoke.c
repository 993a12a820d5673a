#include <math.h>
#include <stdio.h>
#include <string.h>
#include "hdcoint.h"

#define CHECK(cond) do { if (!(cond)) { fprintf(stderr, "failed: %s (%s)\n", #cond, hdc_last_error()); return 1; } } while (0)

int main(void) {
    HdcPanel *panel = NULL;
    CHECK(hdc_simulate_vecm(4, 1, 0.3, 200, 5, &panel) == HDC_STATUS_OK);
    size_t t = 0, n = 0;
    CHECK(hdc_panel_shape(panel, &t, &n) == HDC_STATUS_OK);
    CHECK(t == 200 && n == 4);

    double x[60];
    for (int i = 0; i < 60; i++) x[i] = (i % 2) ? 1.0 : -1.0;
    double stat = 0.0;
    CHECK(hdc_adf_stat(x, 60, 1, 0, &stat) == HDC_STATUS_OK);
    CHECK(stat < -10.0);
    CHECK(hdc_adf_stat(x, 60, 9, 0, &stat) == HDC_STATUS_INVALID_ARGUMENT);
    CHECK(strlen(hdc_last_error()) > 0);

    HdcClassification *cls = NULL;
    CHECK(hdc_classify(panel, "bsqt", 2, 0.05, 0.85, 199, 1, &cls) == HDC_STATUS_OK);
    unsigned int order = 9;
    CHECK(hdc_classification_order(cls, 0, &order) == HDC_STATUS_OK);
    CHECK(order <= 2);
    CHECK(hdc_classification_order(cls, 4, &order) == HDC_STATUS_OUT_OF_RANGE);
    char *json = NULL;
    CHECK(hdc_classification_json(cls, &json) == HDC_STATUS_OK);
    CHECK(strstr(json, "\"series\"") != NULL);
    hdc_string_free(json);
    hdc_classification_free(cls);

    CHECK(hdc_panel_from_csv(NULL, &panel) == HDC_STATUS_NULL_POINTER);
    hdc_panel_free(panel);
    printf("c smoke ok %s\n", hdc_version());
    return 0;
}
