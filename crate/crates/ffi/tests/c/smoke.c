#include <math.h>
#include <stdio.h>
#include <string.h>

#include "twochannel_bell.h"

#define CHECK(cond)                                                        \
  do {                                                                     \
    if (!(cond)) {                                                         \
      fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #cond,       \
              tcb_last_error_message());                                   \
      return 1;                                                            \
    }                                                                      \
  } while (0)

int main(void) {
  TcbConfig *config = tcb_config_new_default();
  CHECK(config != NULL);

  double value = 0.0;
  CHECK(tcb_ratio_lhs(config, &value) == TCB_STATUS_OK);
  CHECK(fabs(value + 1.5) < 1e-12);

  TcbSettings settings;
  CHECK(tcb_config_get_settings(config, &settings) == TCB_STATUS_OK);
  CHECK(settings.b == 120.0);

  TcbLhvBound bound;
  CHECK(tcb_lhv_bound(28, &bound) == TCB_STATUS_OK);
  CHECK(bound.vertex_count == 361 && bound.min_value == -1.0 && bound.passed);
  CHECK(tcb_lhv_bound(30, &bound) == TCB_STATUS_INVALID_INPUT);
  CHECK(strlen(tcb_last_error_message()) > 0);

  TcbConfig *bad = NULL;
  CHECK(tcb_config_from_json("{\"eta\": 2}", &bad) == TCB_STATUS_INVALID_CONFIG);
  CHECK(bad == NULL);
  CHECK(tcb_ratio_lhs(NULL, &value) == TCB_STATUS_NULL_POINTER);

  tcb_config_free(config);
  printf("ok %s\n", tcb_version());
  return 0;
}
