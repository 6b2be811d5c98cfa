#ifndef KSCOLOUR_H
#define KSCOLOUR_H

/* This file is generated by cbindgen from kscolour-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes returned by every fallible entry point.
 */
typedef enum KscStatus {
  KscStatus_Ok = 0,
  KscStatus_NullPointer = 1,
  KscStatus_InvalidArgument = 2,
  KscStatus_ParseError = 3,
  KscStatus_NotOnRationalSphere = 4,
  KscStatus_InternalError = 5,
} KscStatus;

/*
 An opaque ray-set handle.
 */
typedef struct KscRaySet KscRaySet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Version of the underlying toolkit, as a static NUL-terminated string.
 */
const char *kscolour_version(void);

/*
 Message describing the most recent error on this thread. Valid until the
 next failing call on the same thread.
 */
const char *kscolour_last_error_message(void);

/*
 Parses a ray set from its JSON representation.

 # Safety
 `json` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum KscStatus kscolour_ray_set_from_json(const char *json, struct KscRaySet **out);

/*
 The bundled 31-direction Conway-Kochen set.

 # Safety
 `out` must be a valid pointer.
 */
enum KscStatus kscolour_ray_set_conway_kochen(struct KscRaySet **out);

/*
 Frees a ray-set handle; a null handle is a no-op.

 # Safety
 `set` must have come from this library and not already be freed.
 */
void kscolour_ray_set_free(struct KscRaySet *set);

/*
 Number of rays in the set.

 # Safety
 Valid pointers only.
 */
enum KscStatus kscolour_ray_set_len(const struct KscRaySet *set, size_t *out_len);

/*
 Minimum angle between distinct ray lines, in radians.

 # Safety
 Valid pointers only.
 */
enum KscStatus kscolour_ray_set_min_angle(const struct KscRaySet *set, double *out_radians);

/*
 Complete-search colourability: writes 1 when colourable, 0 when not.

 # Safety
 Valid pointers only.
 */
enum KscStatus kscolour_ray_set_decide(const struct KscRaySet *set, uint8_t *out_colourable);

/*
 Colour (0 or 1) of the integer direction under the rational-sphere parity
 colouring with the Z class mapped to 0. Fails with
 `NotOnRationalSphere` when the squared norm is not a perfect square.

 # Safety
 `out_colour` must be a valid pointer.
 */
enum KscStatus kscolour_meyer_colour(int64_t x, int64_t y, int64_t z, uint8_t *out_colour);

/*
 Polar-cap colouring query: writes 0, 1 or -1 (undefined band).

 # Safety
 `out_colour` must be a valid pointer.
 */
enum KscStatus kscolour_polar_cap_query(double x, double y, double z, int8_t *out_colour);

/*
 Monte Carlo estimate of the integral of the minimum rotation-map Jacobian
 for the set, with its standard error. `samples` must be at least 10^4;
 identical `(samples, seed)` reproduce identical estimates.

 # Safety
 Valid pointers only.
 */
enum KscStatus kscolour_deficit_estimate(const struct KscRaySet *set,
                                         uint64_t samples,
                                         uint64_t seed,
                                         double *out_estimate,
                                         double *out_std_error);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* KSCOLOUR_H */
