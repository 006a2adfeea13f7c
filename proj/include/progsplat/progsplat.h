/* Copyright Contributors to the progsplat project
 * SPDX-License-Identifier: Apache-2.0 */

#ifndef PROGSPLAT_PROGSPLAT_H
#define PROGSPLAT_PROGSPLAT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PS_API __declspec(dllexport)
#else
#define PS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ps_status {
    PS_OK = 0,
    PS_INVALID_ARGUMENT = 1,
    PS_NOT_FOUND = 2,
    PS_IO = 3,
    PS_PARSE = 4,
    PS_UNSUPPORTED = 5,
    PS_CONTRACT = 6,
    PS_CONFIG = 7,
    PS_INTERNAL = 8
} ps_status;

typedef struct ps_config ps_config;
typedef struct ps_scene ps_scene;
typedef struct ps_field ps_field;

/* Message of the last failure on the calling thread; empty after success. */
PS_API const char* ps_last_error(void);
PS_API const char* ps_status_name(ps_status status);

PS_API ps_status ps_config_create(ps_config** out);
PS_API void ps_config_destroy(ps_config* config);
PS_API ps_status ps_config_set(ps_config* config, const char* key, const char* value);
PS_API ps_status ps_config_load(ps_config* config, const char* path);
/* Comma-separated ablation names. */
PS_API ps_status ps_config_ablate(ps_config* config, const char* list);
/* Writes the key=value dump; *needed receives the size including the NUL. */
PS_API ps_status ps_config_format(const ps_config* config, char* buffer, size_t capacity, size_t* needed);

/* COLMAP text files from scene_dir, binary PPM rasters from images_dir
 * (scene_dir/images when NULL). */
PS_API ps_status ps_scene_load(const char* scene_dir, const char* images_dir, int downscale, ps_scene** out);
PS_API void ps_scene_destroy(ps_scene* scene);
PS_API size_t ps_scene_frame_count(const ps_scene* scene);
/* Replay order file. Unless a holdout list is set, frames it omits are held out. */
PS_API ps_status ps_scene_set_order(ps_scene* scene, const char* path);
PS_API ps_status ps_scene_set_holdout(ps_scene* scene, const char* path);
/* Poses applied before the final phase, from an images.txt-layout file. */
PS_API ps_status ps_scene_set_refined_poses(ps_scene* scene, const char* images_txt);
PS_API size_t ps_scene_holdout_count(const ps_scene* scene);

typedef struct ps_train_result {
    size_t gaussians;
    size_t events;
    double holdout_psnr_phase2;
    double holdout_psnr_final;
    double holdout_ssim_final;
    double load_integer_std;
    uint64_t checksum;
    double seconds;
} ps_train_result;

/* Receives one JSON object per fly-in event. */
typedef void (*ps_event_callback)(const char* json_line, void* user);

/* Runs all phases and writes final.ply, events.jsonl, metrics.json and
 * config.txt under out_dir. callback and result may be NULL. */
PS_API ps_status ps_train(const ps_config* config, const ps_scene* scene, const char* out_dir,
                          ps_event_callback callback, void* user, ps_train_result* result);

PS_API ps_status ps_field_load(const char* path, ps_field** out);
PS_API void ps_field_destroy(ps_field* field);
PS_API ps_status ps_field_save(const ps_field* field, const char* path, int float32);
PS_API size_t ps_field_size(const ps_field* field);
PS_API int ps_field_sh_degree(const ps_field* field);
PS_API uint64_t ps_field_checksum(const ps_field* field);

/* Pinhole camera; pose maps world to camera (quaternion w, x, y, z). */
typedef struct ps_camera {
    int width;
    int height;
    double fx, fy, cx, cy;
    double qw, qx, qy, qz;
    double tx, ty, tz;
} ps_camera;

/* rgb receives width * height * 3 values, row-major. */
PS_API ps_status ps_render(const ps_field* field, const ps_camera* camera, double* rgb);
PS_API ps_status ps_render_ppm(const ps_field* field, const ps_camera* camera, const char* path);

/* Mean PSNR / SSIM over the scene's held-out frames. */
PS_API ps_status ps_evaluate_holdout(const ps_field* field, const ps_scene* scene, double* mean_psnr,
                                     double* mean_ssim, size_t* views);

/* Writes a procedural test scene (COLMAP text, images/, order.txt, holdout.txt). */
PS_API ps_status ps_synthesize_scene(const char* out_dir, uint64_t seed);

#ifdef __cplusplus
}
#endif

#endif
