/* Samples the 1-D reference scenario through the C API and prints scores. */
#include <stdio.h>
#include "frameguide.h"

int main(void) {
    double mi[1] = {-1.0}, mf[1] = {1.0}, mn[1] = {0.0}, var[1] = {0.1};
    FgEngine *engine = NULL;
    FgTrajectory *traj = NULL;
    FgGuidanceParams params;
    double z0[32], wholistic = 0.0, framewise = 0.0;
    size_t static_pairs = 0;

    if (fg_engine_new(32, 1, 50, mi, mf, mn, var, &engine) != FG_STATUS_OK) {
        fprintf(stderr, "engine: %s\n", fg_last_error_message());
        return 1;
    }
    fg_guidance_params_default(&params);
    if (fg_sample(engine, &params, 7, &traj) != FG_STATUS_OK) {
        fprintf(stderr, "sample: %s\n", fg_last_error_message());
        return 1;
    }
    if (fg_trajectory_state(traj, 0, z0, 32) != FG_STATUS_OK) return 1;
    if (fg_scores(engine, traj, &wholistic, &framewise, &static_pairs) != FG_STATUS_OK) return 1;
    if (fg_trajectory_state(traj, 0, z0, 31) != FG_STATUS_SHAPE_MISMATCH) return 1;

    printf("steps=%zu first=%.6f last=%.6f wholistic=%.6f framewise=%.6f\n",
           fg_trajectory_steps(traj), z0[0], z0[31], wholistic, framewise);
    fg_trajectory_free(traj);
    fg_engine_free(engine);
    return (wholistic > 0.99 && z0[31] > z0[0]) ? 0 : 1;
}
