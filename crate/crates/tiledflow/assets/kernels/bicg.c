void bicg(in float A[12][14], out float s[14], out float q[12], in float p[14], in float r[12]) {
  for (int i = 0; i < 14; i++)
    s[i] = 0;
  for (int i = 0; i < 12; i++) {
    q[i] = 0;
    for (int j = 0; j < 14; j++)
      s[j] += r[i] * A[i][j];
    for (int j = 0; j < 14; j++)
      q[i] += A[i][j] * p[j];
  }
}
