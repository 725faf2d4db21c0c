/* Compiles the public header as C and exercises a few calls. */
#include <stdio.h>

#include "conceptprobe/conceptprobe.h"

int main(void) {
  double out = 0.0;
  if (cp_stance_ratio(10, 4, 20, &out) != CP_OK || out != 0.3) return 1;
  if (cp_stance_ratio(0, 0, 0, &out) != CP_ERR_DATA) return 1;
  if (cp_last_error()[0] == '\0') return 1;
  printf("%s\n", cp_version());
  return 0;
}
