void atax(in float A[12][16], in float x[16], out float y[16], float tmp[12]) {
  for (int i = 0; i < 16; i++)
    y[i] = 0;
  for (int i = 0; i < 12; i++) {
    tmp[i] = 0;
    for (int j = 0; j < 16; j++)
      tmp[i] += A[i][j] * x[j];
    for (int j = 0; j < 16; j++)
      y[j] += A[i][j] * tmp[i];
  }
}
